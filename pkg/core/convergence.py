"""ℏ-convergence sweeps, log-log rate fits and acceptance checks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .assumption import AssumptionReport, check_assumption1
from .classical import ClassicalSystem, Trajectory, build_system, integrate
from .config import (
    MIN_FIT_POINTS,
    NOISE_FLOOR,
    PsiKind,
    PsiSpec,
    SimConfig,
    Study,
    StudyKind,
)
from .correlators import (
    FluctuationMode,
    MultiPoly,
    classical_value,
    compare_correlator,
    fluctuation_expectation,
    heisenberg_expectation,
    static_expectation,
)
from .evolution import hepp_family
from .fock import FockState
from .grammar import parse
from .ncpoly import NcPoly
from .scheduler import run_sweep

logger = logging.getLogger(__name__)

METRIC_W_DISTANCE = "w_distance"
METRIC_RESIDUAL = "residual"
METRIC_CLASSICAL_GAP = "classical_gap"
METRIC_TRACKING = "tracking"

_PRIMARY_METRIC = {
    StudyKind.W_DISTANCE: METRIC_W_DISTANCE,
    StudyKind.CORRELATOR: METRIC_RESIDUAL,
    StudyKind.STATIC: METRIC_RESIDUAL,
}


class FitRefusedError(ValueError):
    """Raised when a log-log fit cannot be made; ``reason`` says why."""

    def __init__(self, reason: str) -> None:
        self.reason = reason
        super().__init__(f"Rate fit refused: {reason}")


class StudyError(RuntimeError):
    """Raised when a convergence study cannot run as configured."""


class AssumptionScreenError(StudyError):
    def __init__(self, report: AssumptionReport) -> None:
        self.report = report
        super().__init__(
            f"Assumption screen verdict {report.verdict.value} ({report.caveat}); "
            "set sweep.assumption_override to run anyway"
        )


class FitStatus(str, Enum):
    OK = "ok"
    BELOW_NOISE_FLOOR = "below_noise_floor"
    INSUFFICIENT = "insufficient"


# ---------------------------------------------------------------------------
# Report types


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    sse: float


@dataclass(frozen=True)
class ConvergenceRow:
    hbar: float
    t: float
    metric: str
    value: float
    truncation_flag: bool = False

    def as_row(self) -> Tuple[float, float, str, float, int]:
        return (self.hbar, self.t, self.metric, self.value, int(self.truncation_flag))


@dataclass(frozen=True)
class MetricFit:
    metric: str
    t: float
    status: FitStatus
    points: int
    fit: Optional[RateFit] = None

    @property
    def slope(self) -> Optional[float]:
        return None if self.fit is None else self.fit.slope


@dataclass(frozen=True)
class ConvergenceReport:
    rows: Tuple[ConvergenceRow, ...]
    fits: Tuple[MetricFit, ...] = ()
    study: Study = field(default_factory=Study)
    assumption: Optional[AssumptionReport] = None

    def values(self, metric: str, t: float) -> List[Tuple[float, float]]:
        return [(row.hbar, row.value) for row in self.rows if row.metric == metric and row.t == t]

    def fit_for(self, metric: str, t: float) -> Optional[MetricFit]:
        for entry in self.fits:
            if entry.metric == metric and entry.t == t:
                return entry
        return None


@dataclass(frozen=True)
class Acceptance:
    passed: bool
    failures: Tuple[str, ...] = ()


@dataclass(frozen=True)
class SimulationResult:
    trajectory: Trajectory
    report: ConvergenceReport


# ---------------------------------------------------------------------------
# Rate fitting


def fit_rate(pairs: Iterable[Tuple[float, float]]) -> RateFit:
    """Least squares of log(value) = slope·log(ℏ) + intercept."""

    pairs = list(pairs)
    if len(pairs) < MIN_FIT_POINTS:
        raise FitRefusedError(f"{len(pairs)} points, at least {MIN_FIT_POINTS} are needed")
    hbars = np.array([float(h) for h, _ in pairs])
    values = np.array([float(v) for _, v in pairs])
    if np.any(hbars <= 0):
        raise FitRefusedError("hbar values must be positive")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise FitRefusedError("values must be positive and finite")
    x = np.log(hbars)
    y = np.log(values)
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    sse = float(np.sum((y - design @ np.array([slope, intercept])) ** 2))
    return RateFit(float(slope), float(intercept), sse)


def _fit_metric(metric: str, t: float, rows: Sequence[ConvergenceRow]) -> MetricFit:
    clean = [(row.hbar, row.value) for row in rows if not row.truncation_flag]
    if len(clean) < MIN_FIT_POINTS:
        logger.warning("Only %d clean rows for %s at t=%g; fit refused", len(clean), metric, t)
        return MetricFit(metric, t, FitStatus.INSUFFICIENT, len(clean))
    if max(value for _, value in clean) <= NOISE_FLOOR:
        logger.warning("%s at t=%g stays below the noise floor %.1e", metric, t, NOISE_FLOOR)
        return MetricFit(metric, t, FitStatus.BELOW_NOISE_FLOOR, len(clean))
    try:
        fit = fit_rate(clean)
    except FitRefusedError as exc:
        logger.warning("%s at t=%g: %s; reporting below noise floor", metric, t, exc.reason)
        return MetricFit(metric, t, FitStatus.BELOW_NOISE_FLOOR, len(clean))
    return MetricFit(metric, t, FitStatus.OK, len(clean), fit)


def fit_report(rows: Iterable[ConvergenceRow]) -> Tuple[MetricFit, ...]:
    """One fit per (metric, t) using the rows whose truncation flag is clear."""

    grouped: Dict[Tuple[str, float], List[ConvergenceRow]] = {}
    for row in rows:
        grouped.setdefault((row.metric, row.t), []).append(row)
    return tuple(_fit_metric(metric, t, grouped[(metric, t)]) for metric, t in sorted(grouped))


def _sorted_rows(rows: Iterable[ConvergenceRow]) -> Tuple[ConvergenceRow, ...]:
    return tuple(sorted(rows, key=lambda row: (-row.hbar, row.t, row.metric)))


# ---------------------------------------------------------------------------
# Study set-up


def initial_state(psi: PsiSpec) -> FockState:
    if psi.kind is PsiKind.VACUUM:
        return FockState.vacuum(0)
    coefficients = list(psi.coefficients)
    return FockState.from_coefficients(coefficients, len(coefficients) - 1)


def prepare(cfg: SimConfig) -> Tuple[NcPoly, ClassicalSystem, Trajectory]:
    """Parse H, build its classical system and integrate the trajectory on {0} ∪ times."""

    H = parse(cfg.hamiltonian)
    system = build_system(H)
    trajectory = integrate(system, cfg.alpha0, (0.0, *cfg.times), cfg.tolerances.ode)
    return H, system, trajectory


def working_cutoff(cfg: SimConfig, trajectory: Trajectory, hbar: float) -> int:
    return cfg.cutoff.resolve(trajectory.alpha_max(), hbar, trajectory.system.degree)


def screen(cfg: SimConfig, H: NcPoly) -> Optional[AssumptionReport]:
    if cfg.assumption_override:
        logger.info("Assumption screen skipped by override")
        return None
    report = check_assumption1(H, cfg.hbars, cfg.assumption_cutoffs)
    if not report.passed:
        raise AssumptionScreenError(report)
    return report


# ---------------------------------------------------------------------------
# Per-ℏ measurements


def _w_distance_rows(cfg: SimConfig, H: NcPoly, trajectory: Trajectory, psi: FockState) -> Callable[[float], List[ConvergenceRow]]:
    def measure(hbar: float) -> List[ConvergenceRow]:
        cutoff = working_cutoff(cfg, trajectory, hbar)
        family = hepp_family(H, cfg.alpha0, hbar, cutoff, trajectory, cfg.quadratic_cutoff)
        rows = []
        for t in cfg.times:
            tail = family.tail_mass(t, psi, cfg.tolerances.tail_margin)
            truncated = tail > cfg.tolerances.tail_epsilon
            if truncated:
                logger.warning("W distance at hbar=%.4g, t=%g has tail mass %.3e", hbar, t, tail)
            rows.append(ConvergenceRow(hbar, t, METRIC_W_DISTANCE, family.w_distance(t, psi), truncated))
        return rows

    return measure


def _slot_times(P: MultiPoly, times: Sequence[float]) -> List[Tuple[float, Tuple[float, ...]]]:
    """(reported t, slot times) pairs: every time for one-slot observables, else the whole grid once."""

    if P.slot_count <= 1:
        return [(t, (t,)) for t in times]
    if P.slot_count > len(times):
        raise StudyError(f"Observable uses {P.slot_count} time slots but only {len(times)} times are configured")
    slots = tuple(times[: P.slot_count])
    return [(max(slots), slots)]


def _correlator_rows(cfg: SimConfig, trajectory: Trajectory, psi: FockState) -> Callable[[float], List[ConvergenceRow]]:
    study = cfg.study
    P = MultiPoly.parse(study.observable or "")
    schedule = _slot_times(P, cfg.times)

    def measure(hbar: float) -> List[ConvergenceRow]:
        cutoff = working_cutoff(cfg, trajectory, hbar)
        rows = []
        for t, slot_times in schedule:
            result = compare_correlator(
                P,
                trajectory,
                hbar,
                cutoff,
                slot_times,
                psi,
                center=study.center,
                rescale=study.rescale,
                tail_epsilon=cfg.tolerances.tail_epsilon,
                tail_margin=cfg.tolerances.tail_margin,
            )
            rows.append(ConvergenceRow(hbar, t, METRIC_RESIDUAL, result.residual, result.truncated))
            if not study.center:
                rows.append(ConvergenceRow(hbar, t, METRIC_CLASSICAL_GAP, abs(result.lhs - result.classical), result.truncated))
        return rows

    return measure


def _static_rows(cfg: SimConfig, trajectory: Trajectory, psi: FockState) -> Callable[[float], List[ConvergenceRow]]:
    study = cfg.study
    P = parse(study.observable or "")
    as_multi = MultiPoly.from_ncpoly(P)

    def reference(hbar: float) -> complex:
        if not study.center:
            return classical_value(as_multi, trajectory, (0.0,))
        scale = 1.0 if study.rescale else hbar
        return fluctuation_expectation(as_multi, trajectory, (0.0,), psi, scale, FluctuationMode.CENTERED_SCALED).value

    def measure(hbar: float) -> List[ConvergenceRow]:
        cutoff = working_cutoff(cfg, trajectory, hbar)
        value = static_expectation(
            P,
            hbar,
            cutoff,
            cfg.alpha0,
            psi,
            center=study.center,
            rescale=study.rescale,
            tail_epsilon=cfg.tolerances.tail_epsilon,
            tail_margin=cfg.tolerances.tail_margin,
        )
        return [ConvergenceRow(hbar, 0.0, METRIC_RESIDUAL, abs(value.value - reference(hbar)), value.truncated)]

    return measure


def run_convergence(cfg: SimConfig, study: Optional[Study] = None) -> ConvergenceReport:
    """Measure the study's metrics at every ℏ of the sweep and fit their rates."""

    if study is not None:
        cfg = cfg.with_study(study)
    study = cfg.study
    if study.kind is not StudyKind.W_DISTANCE and not study.observable:
        raise StudyError(f"Study {study.kind.value} needs an observable")
    H, _system, trajectory = prepare(cfg)
    assumption = screen(cfg, H)
    psi = initial_state(cfg.psi)

    if study.kind is StudyKind.W_DISTANCE:
        measure = _w_distance_rows(cfg, H, trajectory, psi)
    elif study.kind is StudyKind.CORRELATOR:
        measure = _correlator_rows(cfg, trajectory, psi)
    elif study.kind is StudyKind.STATIC:
        measure = _static_rows(cfg, trajectory, psi)
    else:  # pragma: no cover
        raise StudyError(f"Unknown study {study.kind!r}")

    logger.info("Running %s study %r over %d values of hbar", study.kind.value, cfg.name, len(cfg.hbars))
    batches = run_sweep(cfg.hbars, measure, cfg.concurrency)
    rows = _sorted_rows(row for batch in batches for row in batch)
    return ConvergenceReport(rows, fit_report(rows), study, assumption)


def simulate(cfg: SimConfig) -> SimulationResult:
    """Trajectory plus the tracking error |⟨A_ℏ(t)⟩ − α(t)| at each ℏ and time."""

    H, _system, trajectory = prepare(cfg)
    psi = initial_state(cfg.psi)
    position = MultiPoly.parse("a1")

    def measure(hbar: float) -> List[ConvergenceRow]:
        cutoff = working_cutoff(cfg, trajectory, hbar)
        rows = []
        for t in cfg.times:
            value = heisenberg_expectation(
                position,
                trajectory,
                hbar,
                cutoff,
                (t,),
                psi,
                tail_epsilon=cfg.tolerances.tail_epsilon,
                tail_margin=cfg.tolerances.tail_margin,
            )
            gap = abs(value.value - trajectory.at(t).alpha)
            rows.append(ConvergenceRow(hbar, t, METRIC_TRACKING, gap, value.truncated))
        return rows

    rows = _sorted_rows(row for batch in run_sweep(cfg.hbars, measure, cfg.concurrency) for row in batch)
    logger.info("Simulated %r: %d tracking rows", cfg.name, len(rows))
    return SimulationResult(trajectory, ConvergenceReport(rows, fit_report(rows), cfg.study))


# ---------------------------------------------------------------------------
# Acceptance


def evaluate_acceptance(report: ConvergenceReport, study: Optional[Study] = None) -> Acceptance:
    """Apply the study's one-sided slope threshold to every fit of its primary metric.

    Fits below the noise floor pass; refused fits fail. W distances must also
    decrease strictly with ℏ.
    """

    study = study or report.study
    metric = _PRIMARY_METRIC[study.kind]
    threshold = study.slope_threshold
    failures: List[str] = []
    fits = [entry for entry in report.fits if entry.metric == metric]
    if not fits:
        failures.append(f"no {metric} rows were measured")
    for entry in fits:
        if entry.status is FitStatus.INSUFFICIENT:
            failures.append(f"{metric} at t={entry.t:g}: only {entry.points} clean rows")
        elif entry.status is FitStatus.OK and entry.fit.slope < threshold:
            failures.append(f"{metric} at t={entry.t:g}: slope {entry.fit.slope:.4f} below {threshold:g}")
        if study.kind is StudyKind.W_DISTANCE and entry.status is FitStatus.OK:
            values = [value for _, value in sorted(report.values(metric, entry.t), reverse=True)]
            if any(later >= earlier for earlier, later in zip(values, values[1:])):
                failures.append(f"{metric} at t={entry.t:g} does not decrease strictly with hbar")
    for failure in failures:
        logger.warning("Acceptance failure: %s", failure)
    return Acceptance(not failures, tuple(failures))


__all__ = [
    "Acceptance",
    "AssumptionScreenError",
    "ConvergenceReport",
    "ConvergenceRow",
    "FitRefusedError",
    "FitStatus",
    "METRIC_CLASSICAL_GAP",
    "METRIC_RESIDUAL",
    "METRIC_TRACKING",
    "METRIC_W_DISTANCE",
    "MetricFit",
    "RateFit",
    "SimulationResult",
    "StudyError",
    "evaluate_acceptance",
    "fit_rate",
    "fit_report",
    "initial_state",
    "prepare",
    "run_convergence",
    "screen",
    "simulate",
]

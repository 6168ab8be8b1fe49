import math
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import numpy as np
import pytest

from core.config import CutoffMode, CutoffPolicy, PsiKind, PsiSpec, SimConfig, Study, StudyKind, load_config
from core.convergence import (
    METRIC_CLASSICAL_GAP,
    METRIC_RESIDUAL,
    METRIC_TRACKING,
    METRIC_W_DISTANCE,
    AssumptionScreenError,
    ConvergenceReport,
    ConvergenceRow,
    FitRefusedError,
    FitStatus,
    StudyError,
    evaluate_acceptance,
    fit_rate,
    fit_report,
    initial_state,
    run_convergence,
    simulate,
)
from core.spectral_cache import get_cache

HBARS = (0.4, 0.2, 0.1, 0.05)


@pytest.fixture(autouse=True)
def fresh_cache():
    get_cache().reset()
    yield
    get_cache().reset()


def _harmonic_config(**overrides) -> SimConfig:
    settings = dict(
        hamiltonian="a* a",
        alpha0=0.5 + 0j,
        hbars=HBARS,
        times=(1.0,),
        quadratic_cutoff=40,
        assumption_cutoffs=(20, 40),
    )
    settings.update(overrides)
    return SimConfig(**settings)


def _rows(metric: str, values, t: float = 1.0, truncated=()):
    return tuple(
        ConvergenceRow(h, t, metric, v, index in truncated) for index, (h, v) in enumerate(zip(HBARS, values))
    )


# ---------------------------------------------------------------------------
# Rate fits


def test_fit_rate_recovers_known_slopes():
    hbars = np.array(HBARS)
    assert fit_rate(zip(hbars, hbars)).slope == pytest.approx(1.0)
    root = fit_rate(zip(hbars, np.sqrt(hbars)))
    assert root.slope == pytest.approx(0.5)
    assert root.sse == pytest.approx(0.0, abs=1e-20)
    scaled = fit_rate(zip(hbars, 3.0 * hbars**2))
    assert scaled.intercept == pytest.approx(math.log(3.0))


def test_fit_rate_with_noise_stays_close_to_the_true_slope():
    rng = np.random.default_rng(5)
    hbars = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    values = 3.0 * np.sqrt(hbars) * (1.0 + 0.02 * rng.standard_normal(hbars.size))
    assert 0.45 <= fit_rate(zip(hbars, values)).slope <= 0.55


def test_fit_rate_refusals():
    with pytest.raises(FitRefusedError):
        fit_rate([(0.1, 1.0), (0.05, 0.5), (0.025, 0.25)])
    with pytest.raises(FitRefusedError):
        fit_rate([(0.4, 1.0), (0.2, 0.0), (0.1, 0.5), (0.05, 0.2)])
    with pytest.raises(FitRefusedError) as info:
        fit_rate([(0.4, 1.0), (-0.2, 0.5), (0.1, 0.5), (0.05, 0.2)])
    assert "positive" in info.value.reason


def test_fit_report_statuses():
    clean = _rows(METRIC_W_DISTANCE, np.sqrt(HBARS))
    flagged = _rows(METRIC_RESIDUAL, np.sqrt(HBARS), truncated=(0,))
    quiet = _rows(METRIC_CLASSICAL_GAP, [1e-9] * 4)
    fits = {entry.metric: entry for entry in fit_report(clean + flagged + quiet)}
    assert fits[METRIC_W_DISTANCE].status is FitStatus.OK
    assert fits[METRIC_W_DISTANCE].slope == pytest.approx(0.5)
    assert fits[METRIC_RESIDUAL].status is FitStatus.INSUFFICIENT
    assert fits[METRIC_RESIDUAL].points == 3
    assert fits[METRIC_CLASSICAL_GAP].status is FitStatus.BELOW_NOISE_FLOOR
    assert fits[METRIC_CLASSICAL_GAP].slope is None


# ---------------------------------------------------------------------------
# Acceptance


def test_acceptance_applies_the_slope_threshold():
    passing = _rows(METRIC_W_DISTANCE, np.sqrt(HBARS))
    report = ConvergenceReport(passing, fit_report(passing), Study(StudyKind.W_DISTANCE))
    assert evaluate_acceptance(report).passed

    slow = _rows(METRIC_W_DISTANCE, np.power(HBARS, 0.3))
    verdict = evaluate_acceptance(ConvergenceReport(slow, fit_report(slow), Study(StudyKind.W_DISTANCE)))
    assert not verdict.passed
    assert "below 0.45" in verdict.failures[0]

    linear_needed = Study(StudyKind.CORRELATOR, observable="a1")
    residual = _rows(METRIC_RESIDUAL, np.sqrt(HBARS))
    assert not evaluate_acceptance(ConvergenceReport(residual, fit_report(residual), linear_needed)).passed
    relaxed = Study(StudyKind.CORRELATOR, observable="a1", min_slope=0.4)
    assert evaluate_acceptance(ConvergenceReport(residual, fit_report(residual), relaxed)).passed


def test_acceptance_requires_strict_decrease_of_w_distances():
    values = [0.5, 0.3, 0.31, 0.1]
    rows = _rows(METRIC_W_DISTANCE, values)
    verdict = evaluate_acceptance(ConvergenceReport(rows, fit_report(rows), Study()))
    assert any("decrease strictly" in failure for failure in verdict.failures)


def test_acceptance_passes_below_noise_floor_and_fails_without_rows():
    quiet = _rows(METRIC_W_DISTANCE, [1e-10] * 4)
    assert evaluate_acceptance(ConvergenceReport(quiet, fit_report(quiet), Study())).passed
    empty = evaluate_acceptance(ConvergenceReport((), (), Study()))
    assert not empty.passed


# ---------------------------------------------------------------------------
# Studies


def test_initial_state_from_psi_settings():
    assert initial_state(PsiSpec()).cutoff == 0
    state = initial_state(PsiSpec(PsiKind.COEFFICIENTS, (0.6, 0.8)))
    assert state.cutoff == 1
    assert state.coeffs[1] == pytest.approx(0.8)


def test_harmonic_w_distance_study_sits_below_the_noise_floor():
    report = run_convergence(_harmonic_config())
    assert [row.hbar for row in report.rows] == list(HBARS)
    assert all(row.metric == METRIC_W_DISTANCE for row in report.rows)
    assert max(row.value for row in report.rows) < 1e-7
    assert not any(row.truncation_flag for row in report.rows)
    assert report.fits[0].status is FitStatus.BELOW_NOISE_FLOOR
    assert report.assumption is not None and report.assumption.passed
    assert evaluate_acceptance(report).passed


def test_two_slot_correlator_reports_the_latest_time():
    cfg = _harmonic_config(
        times=(0.5, 1.0),
        study=Study(StudyKind.CORRELATOR, observable="a1* a2"),
        assumption_override=True,
        cutoff=CutoffPolicy(CutoffMode.FIXED, fixed=60),
    )
    report = run_convergence(cfg)
    assert {row.t for row in report.rows} == {1.0}
    assert {row.metric for row in report.rows} == {METRIC_RESIDUAL, METRIC_CLASSICAL_GAP}
    assert report.assumption is None
    assert max(row.value for row in report.rows) < 1e-7


def test_study_override_and_missing_observable():
    cfg = _harmonic_config()
    with pytest.raises(StudyError):
        run_convergence(cfg, Study(StudyKind.CORRELATOR))
    with pytest.raises(StudyError):
        run_convergence(
            _harmonic_config(study=Study(StudyKind.CORRELATOR, observable="a1 a2 a3"), assumption_override=True)
        )


def test_failed_screen_stops_the_study():
    cfg = _harmonic_config(hamiltonian="(-1) a* a")
    with pytest.raises(AssumptionScreenError) as info:
        run_convergence(cfg)
    assert not info.value.report.passed


def test_static_study_of_the_number_operator():
    cfg = _harmonic_config(
        study=Study(StudyKind.STATIC, observable="a* a", center=True, rescale=True),
        assumption_override=True,
    )
    report = run_convergence(cfg)
    assert len(report.rows) == len(HBARS)
    assert all(row.t == 0.0 for row in report.rows)
    assert max(row.value for row in report.rows) < 1e-8


def test_simulate_tracks_the_classical_orbit():
    result = simulate(_harmonic_config(times=(0.5, 1.0)))
    assert result.trajectory.t_max == pytest.approx(1.0)
    assert len(result.report.rows) == 2 * len(HBARS)
    assert all(row.metric == METRIC_TRACKING for row in result.report.rows)
    assert max(row.value for row in result.report.rows) < 1e-7


# ---------------------------------------------------------------------------
# Degree-4 studies at the bundled sizes

STUDIES = Path(__file__).resolve().parents[1] / "studies"


def _primary_fit(report, metric):
    fits = [entry for entry in report.fits if entry.metric == metric]
    assert len(fits) == 1
    return fits[0]


@pytest.mark.slow
def test_anharmonic_w_distance_decays_like_sqrt_hbar():
    cfg = load_config(STUDIES / "anharmonic.toml")
    report = run_convergence(cfg)
    fit = _primary_fit(report, METRIC_W_DISTANCE)
    assert fit.status is FitStatus.OK
    assert fit.fit.slope >= 0.45
    values = [value for _, value in sorted(report.values(METRIC_W_DISTANCE, 1.0), reverse=True)]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))
    assert evaluate_acceptance(report).passed


@pytest.mark.slow
def test_anharmonic_correlator_converges_linearly():
    cfg = replace(load_config(STUDIES / "anharmonic.toml"), assumption_override=True)
    report = run_convergence(cfg, Study(StudyKind.CORRELATOR, observable="a1 a1*"))
    fit = _primary_fit(report, METRIC_RESIDUAL)
    assert fit.status is FitStatus.OK
    assert fit.fit.slope >= 0.9
    gaps = dict(report.values(METRIC_CLASSICAL_GAP, 1.0))
    assert gaps[min(gaps)] < gaps[max(gaps)]
    assert evaluate_acceptance(report).passed


@pytest.mark.slow
def test_quartic_fluctuation_study_passes():
    report = run_convergence(load_config(STUDIES / "quartic.toml"))
    assert report.assumption is not None and report.assumption.passed
    assert evaluate_acceptance(report).passed


@pytest.mark.slow
def test_static_study_matches_the_exact_sqrt_hbar_correction():
    psi = PsiSpec(PsiKind.COEFFICIENTS, (math.sqrt(0.5), math.sqrt(0.5)))
    cfg = replace(load_config(STUDIES / "anharmonic.toml"), psi=psi, assumption_override=True)
    report = run_convergence(cfg, Study(StudyKind.STATIC, observable="a* a"))
    for hbar, value in report.values(METRIC_RESIDUAL, 0.0):
        assert value == pytest.approx(math.sqrt(hbar) + 0.5 * hbar, rel=1e-6)
    fit = _primary_fit(report, METRIC_RESIDUAL)
    assert 0.45 <= fit.fit.slope < 0.6
    assert evaluate_acceptance(report).passed

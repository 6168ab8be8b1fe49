"""Dict-in/dict-out facade between the HTTP and CLI layers and the backend."""
from __future__ import annotations

import functools
import logging
import math
import time
from typing import Any, Callable, Dict, Iterable, Mapping, NamedTuple, Optional

from core.assumption import check_assumption1
from core.classical import HamiltonianDegreeError, IntegrationError, NonSymmetricHamiltonianError
from core.config import ASSUMPTION_CUTOFFS, DEFAULT_SEED, INVARIANT_SIZES, ConfigError, SimConfig, Study, StudyKind, config_from_mapping
from core.convergence import (
    AssumptionScreenError,
    ConvergenceReport,
    FitRefusedError,
    StudyError,
    evaluate_acceptance,
    prepare,
    run_convergence,
)
from core.evolution import InfeasibleDisplacementError, NonHermitianGeneratorError, StepSizeUnderflowError
from core.grammar import ExponentOverflowError, PolynomialSyntaxError, format_poly, format_word, parse
from core.invariants import run_invariant_suite
from core.persistence import ReportWriteError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class ErrorClass(NamedTuple):
    code: str
    http_status: int
    exit_code: int


def classify_error(exc: BaseException) -> Optional[ErrorClass]:
    """Map a backend exception to its response code, HTTP status and CLI exit code."""

    if isinstance(exc, (InfeasibleDisplacementError, StepSizeUnderflowError)):
        return ErrorClass("numerical_infeasibility", 422, EXIT_INFEASIBLE)
    if isinstance(exc, IntegrationError):
        return ErrorClass("integration_failed", 422, EXIT_INFEASIBLE)
    if isinstance(exc, ReportWriteError):
        return ErrorClass("write_failed", 500, EXIT_FAILURE)
    if isinstance(exc, AssumptionScreenError):
        return ErrorClass("assumption_failed", 409, EXIT_FAILURE)
    if isinstance(exc, PolynomialSyntaxError):
        return ErrorClass("syntax_error", 400, EXIT_CONFIG)
    if isinstance(exc, ExponentOverflowError):
        return ErrorClass("exponent_overflow", 400, EXIT_CONFIG)
    if isinstance(exc, (NonSymmetricHamiltonianError, NonHermitianGeneratorError)):
        return ErrorClass("non_symmetric", 400, EXIT_CONFIG)
    if isinstance(exc, (ConfigError, HamiltonianDegreeError, StudyError, FitRefusedError)):
        return ErrorClass("config_error", 400, EXIT_CONFIG)
    return None


# ---------------------------------------------------------------------------
# Response helpers


def _operation(name: str) -> Callable[[Callable[..., Dict[str, object]]], Callable[..., Dict[str, object]]]:
    """Stamp every response of the wrapped operation with its name and wall time."""

    def decorate(func: Callable[..., Dict[str, object]]) -> Callable[..., Dict[str, object]]:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Dict[str, object]:
            started = time.perf_counter()
            response = func(*args, **kwargs)
            response["operation"] = name
            response["duration_ms"] = round((time.perf_counter() - started) * 1000.0, 3)
            logger.debug("%s finished ok=%s in %.3f ms", name, response["ok"], response["duration_ms"])
            return response

        return wrapper

    return decorate


def _rejected(code: str, message: str, http_status: int) -> Dict[str, object]:
    return {"ok": False, "error_code": code, "error_message": message, "http_status": int(http_status)}


def _failure(exc: Exception) -> Dict[str, object]:
    error = classify_error(exc)
    if error is None:
        raise exc
    logger.info("Request rejected (%s): %s", error.code, exc)
    payload = _rejected(error.code, str(exc), error.http_status)
    field_name = getattr(exc, "field", None)
    if field_name:
        payload["field"] = field_name
    return payload


def _complex(value: complex) -> list:
    return [float(value.real), float(value.imag)]


def _config(payload: Mapping[str, Any]) -> SimConfig:
    if not isinstance(payload, Mapping):
        raise ConfigError("payload", "expected a JSON object")
    return config_from_mapping(payload, name=str(payload.get("name", "request")))


# ---------------------------------------------------------------------------
# Operations


@_operation("parse")
def parse_polynomial(text: object) -> Dict[str, object]:
    if not isinstance(text, str):
        return _rejected("invalid_payload", "Field 'text' must be a string", 400)
    try:
        poly = parse(text)
    except (PolynomialSyntaxError, ExponentOverflowError) as exc:
        response = _failure(exc)
        if isinstance(exc, PolynomialSyntaxError):
            response["offset"] = exc.offset
        return response
    terms = [
        {"word": format_word(word) or "1", "coefficient": _complex(coeff)}
        for word, coeff in poly.items()
    ]
    return {
        "ok": True,
        "canonical": format_poly(poly),
        "degree": poly.degree,
        "symmetric": poly.is_symmetric(1e-12),
        "terms": terms,
    }


@_operation("trajectory")
def trajectory(payload: Mapping[str, Any]) -> Dict[str, object]:
    try:
        cfg = _config(payload)
        _, system, traj = prepare(cfg)
    except Exception as exc:  # classified below; unknown errors propagate
        return _failure(exc)
    samples = [
        {
            "t": float(sample.t),
            "alpha": _complex(sample.alpha),
            "gamma": _complex(sample.gamma),
            "delta": _complex(sample.delta),
            "f": float(sample.f),
            "energy": float(system.energy(sample.alpha)),
        }
        for sample in traj.samples
    ]
    return {"ok": True, "hamiltonian": cfg.hamiltonian, "alpha_max": traj.alpha_max(), "samples": samples}


def report_payload(report: ConvergenceReport) -> Dict[str, object]:
    acceptance = evaluate_acceptance(report)
    return {
        "study": report.study.kind.value,
        "rows": [
            {"hbar": row.hbar, "t": row.t, "metric": row.metric, "value": row.value, "truncated": row.truncation_flag}
            for row in report.rows
        ],
        "fits": [
            {
                "metric": entry.metric,
                "t": entry.t,
                "status": entry.status.value,
                "points": entry.points,
                "slope": entry.slope,
                "intercept": None if entry.fit is None else entry.fit.intercept,
                "sse": None if entry.fit is None else entry.fit.sse,
            }
            for entry in report.fits
        ],
        "accepted": acceptance.passed,
        "failures": list(acceptance.failures),
    }


@_operation("converge")
def converge(payload: Mapping[str, Any], study: Optional[str] = None) -> Dict[str, object]:
    try:
        cfg = _config(payload)
        override = None
        if study is not None:
            try:
                kind = StudyKind(str(study).lower())
            except ValueError as exc:
                raise ConfigError("sweep.study", f"unknown study {study!r}") from exc
            override = Study(kind, cfg.study.observable, cfg.study.center, cfg.study.rescale, cfg.study.min_slope)
        report = run_convergence(cfg, override)
    except Exception as exc:  # classified below; unknown errors propagate
        return _failure(exc)
    return {"ok": True, **report_payload(report)}


@_operation("assumptions")
def assumptions(payload: Mapping[str, Any]) -> Dict[str, object]:
    try:
        cfg = _config(payload)
        report = check_assumption1(parse(cfg.hamiltonian), cfg.hbars, cfg.assumption_cutoffs or ASSUMPTION_CUTOFFS)
    except Exception as exc:  # classified below; unknown errors propagate
        return _failure(exc)
    records = [
        {
            "hbar": record.hbar,
            "M": record.cutoff,
            "min_eig": record.min_eig,
            "C": record.shift,
            "beta": record.beta,
            "c_beta": record.c_beta,
            "verdict": record.verdict.value,
        }
        for record in report.records
    ]
    return {"ok": True, "verdict": report.verdict.value, "caveat": report.caveat, "records": records}


@_operation("invariants")
def invariants(
    seed: object = None,
    sizes: Optional[Iterable[object]] = None,
    fault_injection: bool = False,
) -> Dict[str, object]:
    try:
        seed_value = DEFAULT_SEED if seed is None else int(seed)
        size_values = INVARIANT_SIZES if sizes is None else tuple(int(m) for m in sizes)
    except (TypeError, ValueError):
        return _rejected("invalid_payload", "seed and sizes must be integers", 400)
    if any(m < 1 for m in size_values):
        return _rejected("invalid_payload", "sizes must be positive", 400)
    ledger = run_invariant_suite(seed_value, size_values, fault_injection)
    rows = [
        {
            "invariant": result.name,
            "max_residual": result.max_residual if math.isfinite(result.max_residual) else None,
            "bound": result.bound,
            "verdict": result.verdict.value,
            "detail": result.detail,
        }
        for result in ledger.results
    ]
    return {"ok": True, "passed": ledger.passed, "seed": seed_value, "sizes": list(size_values), "invariants": rows}


__all__ = [
    "EXIT_CONFIG",
    "EXIT_FAILURE",
    "EXIT_INFEASIBLE",
    "EXIT_OK",
    "ErrorClass",
    "assumptions",
    "classify_error",
    "converge",
    "invariants",
    "parse_polynomial",
    "report_payload",
    "trajectory",
]

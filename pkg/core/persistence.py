"""CSV writers for reports, trajectories and Fock-space dumps.

Every writer produces a header line, a fixed column order, floats with 17
significant digits and LF line endings, so identical inputs give identical
bytes.
"""
from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from .assumption import AssumptionReport
from .classical import Trajectory
from .config import CSV_FLOAT_FORMAT
from .convergence import ConvergenceReport
from .fock import FockOperator, FockState
from .invariants import InvariantLedger

logger = logging.getLogger(__name__)

CONVERGENCE_HEADER = ("hbar", "t", "metric", "value", "truncation_flag")
ASSUMPTION_HEADER = ("hbar", "M", "min_eig", "C", "beta", "c_beta", "verdict")
INVARIANT_HEADER = ("invariant", "max_residual", "bound", "verdict")
TRAJECTORY_HEADER = ("t", "re_alpha", "im_alpha", "re_gamma", "im_gamma", "re_delta", "im_delta", "f", "energy")
FOCK_HEADER = ("row", "col", "re", "im")

Report = Union[ConvergenceReport, AssumptionReport, InvariantLedger]


class ReportWriteError(OSError):
    """Raised when a report cannot be written to ``path``."""

    def __init__(self, path: Path | str, reason: str) -> None:
        self.path = str(path)
        super().__init__(f"Cannot write {self.path}: {reason}")


def format_value(value: object) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), CSV_FLOAT_FORMAT)
    return str(value)


def _render(header: Sequence[str], rows: Iterable[Sequence[object]], comments: Sequence[str] = ()) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(cell) for cell in row])
    for comment in comments:
        buffer.write(f"# {comment}\n")
    return buffer.getvalue()


def _write(path: Path | str, text: str) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportWriteError(target, exc.strerror or str(exc)) from exc
    logger.info("Wrote %s", target)
    return target


# ---------------------------------------------------------------------------
# Reports


def _fit_comments(report: ConvergenceReport) -> List[str]:
    lines = []
    for entry in report.fits:
        if entry.fit is None:
            slope = intercept = sse = "nan"
        else:
            slope, intercept, sse = (format_value(x) for x in (entry.fit.slope, entry.fit.intercept, entry.fit.sse))
        lines.append(
            f"fit {entry.metric} {slope} {intercept} {sse} t={format_value(float(entry.t))} status={entry.status.value}"
        )
    return lines


def render_report(report: Report) -> str:
    """CSV text for any report type."""

    if isinstance(report, ConvergenceReport):
        return _render(CONVERGENCE_HEADER, (row.as_row() for row in report.rows), _fit_comments(report))
    if isinstance(report, AssumptionReport):
        comments = [f"caveat {report.caveat}"] if report.records else []
        return _render(ASSUMPTION_HEADER, (record.as_row() for record in report.records), comments)
    if isinstance(report, InvariantLedger):
        return _render(INVARIANT_HEADER, (result.as_row() for result in report.results))
    raise TypeError(f"Unsupported report type {type(report).__name__}")


def emit_csv(report: Report, path: Path | str) -> Path:
    return _write(path, render_report(report))


# ---------------------------------------------------------------------------
# Trajectories and Fock data


def export_trajectory_csv(traj: Trajectory, path: Path | str) -> Path:
    return _write(path, _render(TRAJECTORY_HEADER, traj.rows()))


def render_fock(target: FockOperator | FockState | np.ndarray, hbar: float = 1.0) -> str:
    """Non-zero entries as (row, col, re, im); states are written as a single column."""

    if isinstance(target, FockOperator):
        matrix = target.matrix
    elif isinstance(target, FockState):
        matrix = target.coeffs[:, None]
    else:
        matrix = np.asarray(target, dtype=complex)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
    cutoff = matrix.shape[0] - 1
    rows, cols = np.nonzero(matrix)
    entries = ((int(r), int(c), float(matrix[r, c].real), float(matrix[r, c].imag)) for r, c in zip(rows, cols))
    return f"# fock M={cutoff} hbar={format_value(float(hbar))}\n" + _render(FOCK_HEADER, entries)


def dump_fock_csv(target: FockOperator | FockState | np.ndarray, path: Path | str, hbar: float = 1.0) -> Path:
    return _write(path, render_fock(target, hbar))


__all__ = [
    "ReportWriteError",
    "dump_fock_csv",
    "emit_csv",
    "export_trajectory_csv",
    "format_value",
    "render_fock",
    "render_report",
]

"""Numeric screen for the lower bound and number-operator domination of H_ℏ.

For each ℏ and cutoff M the level-M truncation of H(a_ℏ, a_ℏ†) is restricted
to the interior block 0..M−d, where truncation-edge eigenvalues cannot leak
in. The screen then records

* the lowest interior eigenvalue λ_min and the shift C = max(0, 1 − λ_min)
  that makes H_ℏ + C ≥ I,
* for each β the smallest c_β with 𝒩_ℏ^β ⪯ c_β (H_ℏ + C)^β, the largest
  generalized eigenvalue of the pencil (𝒩_ℏ^β, (H_ℏ + C)^β).

This is evidence, never a proof: a verdict only says the constants look
ℏ-uniform and stable under a change of cutoff.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy import linalg

from .classical import NonSymmetricHamiltonianError
from .config import (
    ASSUMPTION_BETAS,
    ASSUMPTION_CAVEAT,
    ASSUMPTION_CUTOFFS,
    ASSUMPTION_STABILITY_FACTOR,
)
from .fock import number_operator, poly_matrix
from .ncpoly import NcPoly

logger = logging.getLogger(__name__)

# Relative drop of λ_min between the two largest cutoffs that counts as unbounded below.
SPECTRUM_DROP_TOL = 1e-3


class Verdict(str, Enum):
    PASS = "PASS"
    UNSTABLE = "UNSTABLE"
    FAIL = "FAIL"


_SEVERITY = {Verdict.PASS: 0, Verdict.UNSTABLE: 1, Verdict.FAIL: 2}


@dataclass(frozen=True)
class AssumptionRecord:
    hbar: float
    cutoff: int
    min_eig: float
    shift: float
    beta: float
    c_beta: float
    verdict: Verdict

    def as_row(self) -> Tuple[float, int, float, float, float, float, str]:
        return (self.hbar, self.cutoff, self.min_eig, self.shift, self.beta, self.c_beta, self.verdict.value)


@dataclass(frozen=True)
class AssumptionReport:
    records: Tuple[AssumptionRecord, ...]
    caveat: str = ASSUMPTION_CAVEAT

    @property
    def verdict(self) -> Verdict:
        worst = Verdict.PASS
        for record in self.records:
            if _SEVERITY[record.verdict] > _SEVERITY[worst]:
                worst = record.verdict
        return worst

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def for_hbar(self, hbar: float) -> List[AssumptionRecord]:
        return [record for record in self.records if record.hbar == hbar]


@dataclass(frozen=True)
class _Measurement:
    min_eig: float
    shift: float
    constants: Dict[float, float]


def _interior_block(H: NcPoly, hbar: float, cutoff: int) -> np.ndarray:
    rows = cutoff - H.degree + 1
    if rows < 1:
        raise ValueError(f"Cutoff {cutoff} leaves no interior block for degree {H.degree}")
    matrix = poly_matrix(H, cutoff, hbar, exact_truncation=True).matrix[:rows, :rows]
    return 0.5 * (matrix + matrix.conj().T)


def _measure(H: NcPoly, hbar: float, cutoff: int, betas: Sequence[float]) -> _Measurement:
    block = _interior_block(H, hbar, cutoff)
    eigenvalues, eigenvectors = linalg.eigh(block)
    min_eig = float(eigenvalues[0])
    shift = max(0.0, 1.0 - min_eig)
    shifted = eigenvalues + shift
    number = np.diag(number_operator(cutoff, hbar).matrix)[: block.shape[0]].real
    constants: Dict[float, float] = {}
    for beta in betas:
        dominating = (eigenvectors * shifted**beta) @ eigenvectors.conj().T
        dominating = 0.5 * (dominating + dominating.conj().T)
        pencil = linalg.eigh(np.diag(number**beta).astype(complex), dominating, eigvals_only=True)
        constants[float(beta)] = float(max(pencil[-1], 0.0))
    return _Measurement(min_eig, shift, constants)


def _verdict(small: _Measurement, large: _Measurement) -> Verdict:
    if large.min_eig < small.min_eig - SPECTRUM_DROP_TOL * (1.0 + abs(small.min_eig)):
        return Verdict.FAIL
    for beta, c_small in small.constants.items():
        c_large = large.constants[beta]
        low, high = sorted((c_small, c_large))
        if high > ASSUMPTION_STABILITY_FACTOR * low:
            return Verdict.UNSTABLE
    return Verdict.PASS


def check_assumption1(
    H: NcPoly,
    hbars: Iterable[float],
    cutoffs: Sequence[int] = ASSUMPTION_CUTOFFS,
    betas: Sequence[float] = ASSUMPTION_BETAS,
) -> AssumptionReport:
    """Screen H_ℏ + C ≥ I and 𝒩_ℏ^β ⪯ c_β (H_ℏ + C)^β at every ℏ and cutoff."""

    pairs = H.asymmetric_pairs(1e-12)
    if pairs:
        raise NonSymmetricHamiltonianError(pairs)
    cutoffs = sorted(int(m) for m in cutoffs)
    if len(cutoffs) < 2:
        raise ValueError("At least two cutoffs are needed to judge stability")

    records: List[AssumptionRecord] = []
    for hbar in hbars:
        hbar = float(hbar)
        measured = {m: _measure(H, hbar, m, betas) for m in cutoffs}
        verdict = _verdict(measured[cutoffs[-2]], measured[cutoffs[-1]])
        logger.info("Assumption screen at hbar=%.4g: %s (min eigenvalue %.6g at M=%d)", hbar, verdict.value, measured[cutoffs[-1]].min_eig, cutoffs[-1])
        for cutoff in cutoffs:
            data = measured[cutoff]
            for beta, c_beta in data.constants.items():
                records.append(AssumptionRecord(hbar, cutoff, data.min_eig, data.shift, beta, c_beta, verdict))
    return AssumptionReport(tuple(records))


__all__ = [
    "AssumptionRecord",
    "AssumptionReport",
    "Verdict",
    "check_assumption1",
]

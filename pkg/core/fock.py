"""Truncated Fock-space realisation of the ladder algebra.

Basis vectors Ω₀ … Ω_M are indexed by n; operators are dense (M+1)×(M+1) complex
matrices with aΩ_n = √n Ω_{n−1} and a†Ω_n = √(n+1) Ω_{n+1}.  Words are applied
right to left, so a monomial maps column n to row n + ℓ.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .alphabet import THETA, THETA_STAR, Word, count_theta_star, make_word, max_excursion, shift
from .config import HERMITIAN_TOL
from .ncpoly import NcPoly

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[complex]]


# ---------------------------------------------------------------------------
# States and operators


@dataclass(frozen=True, eq=False)
class FockState:
    """Vector of coefficients ⟨ψ, Ω_n⟩ for n = 0..M."""

    coeffs: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        array = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        object.__setattr__(self, "coeffs", array)
        if self.normalized and abs(np.linalg.norm(array) - 1.0) > 1e-12:
            raise ValueError("State flagged normalized but has norm %.3e" % np.linalg.norm(array))

    @classmethod
    def vacuum(cls, cutoff: int) -> "FockState":
        return cls.basis(0, cutoff)

    @classmethod
    def basis(cls, n: int, cutoff: int) -> "FockState":
        if not 0 <= n <= cutoff:
            raise ValueError(f"Basis index {n} outside 0..{cutoff}")
        coeffs = np.zeros(cutoff + 1, dtype=complex)
        coeffs[n] = 1.0
        return cls(coeffs, normalized=True)

    @classmethod
    def from_coefficients(cls, values: Iterable[complex], cutoff: int, normalize: bool = True) -> "FockState":
        values = np.asarray(list(values), dtype=complex)
        if values.size > cutoff + 1:
            raise ValueError(f"{values.size} coefficients do not fit cutoff {cutoff}")
        coeffs = np.zeros(cutoff + 1, dtype=complex)
        coeffs[: values.size] = values
        if normalize:
            norm = np.linalg.norm(coeffs)
            if norm == 0.0:
                raise ValueError("Cannot normalize the zero vector")
            coeffs = coeffs / norm
        return cls(coeffs, normalized=normalize)

    @property
    def cutoff(self) -> int:
        return self.coeffs.size - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def padded(self, cutoff: int) -> "FockState":
        """Zero-pad (or crop, when the dropped entries vanish) to ``cutoff``."""

        if cutoff >= self.cutoff:
            coeffs = np.zeros(cutoff + 1, dtype=complex)
            coeffs[: self.coeffs.size] = self.coeffs
            return FockState(coeffs, self.normalized)
        if np.any(self.coeffs[cutoff + 1 :] != 0):
            raise ValueError("Cropping would discard nonzero coefficients")
        return FockState(self.coeffs[: cutoff + 1].copy(), self.normalized)


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense matrix on span{Ω₀ … Ω_M}; ``bands`` lists the occupied offsets row − col."""

    matrix: np.ndarray
    hbar: Optional[float] = None
    bands: Optional[FrozenSet[int]] = field(default=None)

    def __post_init__(self) -> None:
        array = np.asarray(self.matrix, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise ValueError(f"Operator matrix must be square, got shape {array.shape}")
        object.__setattr__(self, "matrix", array)

    @property
    def cutoff(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.asymmetry() <= tol

    def adjoint(self) -> "FockOperator":
        bands = None if self.bands is None else frozenset(-b for b in self.bands)
        return FockOperator(self.matrix.conj().T, self.hbar, bands)

    def apply(self, state: FockState | np.ndarray) -> FockState:
        vector = state.coeffs if isinstance(state, FockState) else np.asarray(state, dtype=complex)
        return FockState(self.matrix @ vector)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return FockOperator(self.matrix @ other.matrix, self.hbar)
        if isinstance(other, FockState):
            return self.apply(other)
        return NotImplemented

    def __add__(self, other: "FockOperator") -> "FockOperator":
        if not isinstance(other, FockOperator):
            return NotImplemented
        return FockOperator(self.matrix + other.matrix, self.hbar, _merge_bands(self.bands, other.bands))

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        if not isinstance(other, FockOperator):
            return NotImplemented
        return FockOperator(self.matrix - other.matrix, self.hbar, _merge_bands(self.bands, other.bands))

    def __mul__(self, scalar: complex) -> "FockOperator":
        if not isinstance(scalar, (int, float, complex, np.number)):
            return NotImplemented
        return FockOperator(self.matrix * scalar, self.hbar, self.bands)

    __rmul__ = __mul__


def _merge_bands(left: Optional[FrozenSet[int]], right: Optional[FrozenSet[int]]) -> Optional[FrozenSet[int]]:
    if left is None or right is None:
        return None
    return left | right


def _as_matrix(op: FockOperator | np.ndarray) -> np.ndarray:
    return op.matrix if isinstance(op, FockOperator) else np.asarray(op, dtype=complex)


def _as_vector(psi: FockState | np.ndarray) -> np.ndarray:
    return psi.coeffs if isinstance(psi, FockState) else np.asarray(psi, dtype=complex)


# ---------------------------------------------------------------------------
# Ladder operators and monomial coefficients


def ladder_matrices(cutoff: int, hbar: float = 1.0) -> Tuple[FockOperator, FockOperator]:
    """Truncated (√ℏ a, √ℏ a†) on span{Ω₀ … Ω_M}."""

    if cutoff < 1:
        raise ValueError("Cutoff must be at least 1")
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    lower = np.diag(np.sqrt(hbar * np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)
    a = FockOperator(lower, hbar, frozenset({-1}))
    return a, a.adjoint()


def number_operator(cutoff: int, hbar: float = 1.0) -> FockOperator:
    """𝒩_ℏ = ℏ a†a, diagonal ℏn."""

    return FockOperator(np.diag(hbar * np.arange(cutoff + 1, dtype=float)).astype(complex), hbar, frozenset({0}))


@dataclass(frozen=True)
class LadderCoeff:
    """c_A(n) with AΩ_n = c_A(n) Ω_{n+ℓ} for the monomial A of ``word``."""

    word: Word

    @property
    def shift(self) -> int:
        return shift(self.word)

    @property
    def length(self) -> int:
        return len(self.word)

    @property
    def stars(self) -> int:
        return count_theta_star(self.word)

    def __call__(self, n):
        """Evaluate at an integer or an integer array."""

        scalar = np.ndim(n) == 0
        index = np.atleast_1d(np.asarray(n, dtype=np.int64))
        values = np.where(index >= 0, 1.0, 0.0)
        level = index.astype(float)
        for letter in reversed(self.word):
            if letter is THETA:
                values = values * np.sqrt(np.clip(level, 0.0, None))
                level = level - 1.0
            else:
                values = values * np.sqrt(np.clip(level + 1.0, 0.0, None))
                level = level + 1.0
        values = np.where(index + self.shift >= 0, values, 0.0)
        return float(values[0]) if scalar else values

    def bound(self, n):
        """(n + q)^{k/2}, the growth envelope of c_A."""

        return (np.asarray(n, dtype=float) + self.stars) ** (self.length / 2.0)


def monomial_coeff(word: Iterable) -> LadderCoeff:
    return LadderCoeff(make_word(word))


def interior_limit(target: Union[NcPoly, Iterable], cutoff: int) -> int:
    """Largest column whose ladder path never leaves span{Ω₀ … Ω_M}.

    Columns 0..interior_limit are free of truncation artifacts; the value is
    negative when no column qualifies.
    """

    if isinstance(target, NcPoly):
        excursion = max((max_excursion(word) for word in target.terms), default=0)
    else:
        excursion = max_excursion(make_word(target))
    return cutoff - excursion


def monomial_matrix(word: Iterable, cutoff: int, hbar: float = 1.0, exact_truncation: bool = False) -> FockOperator:
    """ℏ^{k/2} times the product of truncated ladder matrices along ``word``.

    With ``exact_truncation`` the result is P_M A P_M for the untruncated
    monomial A instead, which differs only on columns past the interior limit.
    """

    word = make_word(word)
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    if cutoff < 0:
        raise ValueError("Cutoff must be non-negative")
    coeff = LadderCoeff(word)
    ell = coeff.shift
    columns = np.arange(cutoff + 1)
    rows = columns + ell
    keep = (rows >= 0) & (rows <= cutoff)
    if not exact_truncation:
        keep &= columns + max_excursion(word) <= cutoff
    matrix = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    values = coeff(columns[keep]) * hbar ** (len(word) / 2.0)
    matrix[rows[keep], columns[keep]] = values
    return FockOperator(matrix, hbar, frozenset({ell}))


def poly_matrix(P: NcPoly, cutoff: int, hbar: float = 1.0, exact_truncation: bool = False) -> FockOperator:
    """P(a_ℏ, a_ℏ†) on the truncated space, summed word by word."""

    matrix = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    bands = set()
    for word, coeff in P.items():
        monomial = monomial_matrix(word, cutoff, hbar, exact_truncation)
        matrix += coeff * monomial.matrix
        bands.add(shift(word))
    return FockOperator(matrix, hbar, frozenset(bands))


def truncate(Q: FockOperator, cutoff: int) -> FockOperator:
    """P_M Q P_M kept at the ambient dimension."""

    if cutoff > Q.cutoff:
        raise ValueError(f"Truncation level {cutoff} exceeds operator cutoff {Q.cutoff}")
    matrix = np.zeros_like(Q.matrix)
    matrix[: cutoff + 1, : cutoff + 1] = Q.matrix[: cutoff + 1, : cutoff + 1]
    return FockOperator(matrix, Q.hbar, Q.bands)


def compress(Q: FockOperator, cutoff: int) -> FockOperator:
    """Leading (M+1)×(M+1) block as an operator on the smaller space."""

    if cutoff > Q.cutoff:
        raise ValueError(f"Compression level {cutoff} exceeds operator cutoff {Q.cutoff}")
    return FockOperator(Q.matrix[: cutoff + 1, : cutoff + 1].copy(), Q.hbar, Q.bands)


# ---------------------------------------------------------------------------
# Weighted norms


def beta_weights(cutoff: int, beta: float) -> np.ndarray:
    return (np.arange(cutoff + 1, dtype=float) + 1.0) ** beta


def beta_norm(psi: FockState | np.ndarray, beta: float) -> float:
    """‖ψ‖_β with weights (n+1)^β."""

    vector = _as_vector(psi)
    if beta < 0:
        raise ValueError("beta must be non-negative")
    weights = beta_weights(vector.size - 1, beta)
    return float(np.linalg.norm(weights * vector))


def op_norm(T: FockOperator | np.ndarray, beta_in: float, beta_out: float) -> float:
    """Exact ‖T‖_{β_in→β_out}: top singular value of D_out T D_in⁻¹."""

    matrix = _as_matrix(T)
    cutoff = matrix.shape[0] - 1
    weighted = beta_weights(cutoff, beta_out)[:, None] * matrix / beta_weights(cutoff, beta_in)[None, :]
    if not np.any(weighted):
        return 0.0
    return float(linalg.svdvals(weighted)[0])


def bound_K(beta: float, degree: int) -> float:
    """β d^{1+d/2} (1+d)^{|β−1|}, the commutator constant for degree-d words."""

    if degree < 1:
        raise ValueError("Degree must be at least 1")
    return beta * degree ** (1 + degree / 2.0) * (1 + degree) ** abs(beta - 1)


# ---------------------------------------------------------------------------
# Coherent states


def coherent_column(alpha: complex, hbar: float, cutoff: int) -> np.ndarray:
    """e^{−|z|²/2} zⁿ/√n! with z = α/√ℏ, i.e. the column U_ℏ(α)Ω₀ of the full space."""

    z = complex(alpha) / math.sqrt(hbar)
    column = np.empty(cutoff + 1, dtype=complex)
    column[0] = math.exp(-abs(z) ** 2 / 2.0)
    for n in range(1, cutoff + 1):
        column[n] = column[n - 1] * z / math.sqrt(n)
    return column


def hermitian_check(op: FockOperator, tol: float = HERMITIAN_TOL) -> float:
    """Return the max asymmetry; logs when it exceeds ``tol``."""

    asymmetry = op.asymmetry()
    if asymmetry > tol:
        logger.warning("Operator asymmetry %.3e exceeds tolerance %.1e", asymmetry, tol)
    return asymmetry


__all__ = [
    "FockOperator",
    "FockState",
    "LadderCoeff",
    "beta_norm",
    "beta_weights",
    "bound_K",
    "coherent_column",
    "compress",
    "hermitian_check",
    "interior_limit",
    "ladder_matrices",
    "monomial_coeff",
    "monomial_matrix",
    "number_operator",
    "op_norm",
    "poly_matrix",
    "truncate",
]

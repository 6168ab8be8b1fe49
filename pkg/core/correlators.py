"""Multi-time Heisenberg correlators and their classical and fluctuation predictions."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .alphabet import THETA, THETA_STAR, Letter
from .classical import Trajectory
from .config import DEFAULT_TAIL_EPSILON, DEFAULT_TAIL_MARGIN
from .evolution import as_vector, hamiltonian_propagator, weyl
from .fock import FockState, ladder_matrices
from .grammar import parse_multi_terms
from .ncpoly import MinDegree, NcPoly

logger = logging.getLogger(__name__)

SlotLetter = Tuple[int, Letter]
SlotWord = Tuple[SlotLetter, ...]

VARIANCE_IMAG_TOL = 1e-9


class ComplexExpectationError(ValueError):
    """Raised when a symmetric observable yields an expectation with a sizeable imaginary part."""

    def __init__(self, imag: float, tol: float) -> None:
        self.imag = imag
        self.tol = tol
        super().__init__(f"Expectation has imaginary part {imag:.3e} above {tol:.1e}")


class FluctuationMode(str, Enum):
    CENTERED_SCALED = "centered_scaled"
    SHIFTED = "shifted"


class Expectation(NamedTuple):
    value: complex
    tail_mass: float
    truncated: bool


class Variance(NamedTuple):
    value: float
    tail_mass: float
    truncated: bool


@dataclass(frozen=True)
class CorrelatorResult:
    lhs: complex
    rhs: complex
    classical: complex
    hbar: float
    times: Tuple[float, ...]
    truncated: bool = False

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


# ---------------------------------------------------------------------------
# Slot-indexed polynomials


class MultiPoly:
    """Polynomial in θ_i, θ_i* for time slots i = 1..n."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Iterable[SlotLetter], complex] | None = None) -> None:
        collected: Dict[SlotWord, complex] = {}
        for raw_word, coeff in (terms or {}).items():
            word = tuple((int(slot), Letter(letter)) for slot, letter in raw_word)
            if any(slot < 1 for slot, _ in word):
                raise ValueError("Time-slot indices start at 1")
            collected[word] = collected.get(word, 0j) + complex(coeff)
        self._terms = {
            word: collected[word]
            for word in sorted(collected, key=lambda w: tuple((s, 0 if l is THETA else 1) for s, l in w))
            if collected[word] != 0
        }

    @classmethod
    def parse(cls, text: str) -> "MultiPoly":
        return cls(parse_multi_terms(text))

    @classmethod
    def from_ncpoly(cls, P: NcPoly, slot: int = 1) -> "MultiPoly":
        return cls({tuple((slot, letter) for letter in word): coeff for word, coeff in P.items()})

    @classmethod
    def constant(cls, value: complex) -> "MultiPoly":
        return cls({(): value})

    @property
    def terms(self) -> Mapping[SlotWord, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    @property
    def slot_count(self) -> int:
        return max((slot for word in self._terms for slot, _ in word), default=0)

    @property
    def degree(self) -> int:
        return max((len(word) for word in self._terms), default=0)

    def min_degree(self) -> MinDegree:
        lengths = [len(word) for word in self._terms if word]
        if not lengths:
            return MinDegree(0, True)
        return MinDegree(min(lengths), False)

    def __repr__(self) -> str:
        return f"MultiPoly({self._terms!r})"


def _check_times(P: MultiPoly, times: Sequence[float]) -> Tuple[float, ...]:
    times = tuple(float(t) for t in times)
    if P.slot_count > len(times):
        raise ValueError(f"Observable uses {P.slot_count} time slots but {len(times)} times were given")
    return times


def _tail(vector: np.ndarray, cutoff: int, margin: int) -> float:
    norm = np.linalg.norm(vector)
    if norm == 0.0:
        return 0.0
    start = max(cutoff - margin + 1, 0)
    return float(np.linalg.norm(vector[start:]) / norm)


def _walk(
    P: MultiPoly,
    state: np.ndarray,
    apply_letter: Callable[[SlotLetter, np.ndarray], Tuple[np.ndarray, float]],
) -> Tuple[complex, float]:
    """Σ_w c_w ⟨state, w·state⟩ applying each word right to left."""

    total = 0j
    worst_tail = 0.0
    for word, coeff in P.items():
        vector = state
        for slot_letter in reversed(word):
            vector, tail = apply_letter(slot_letter, vector)
            worst_tail = max(worst_tail, tail)
        total += coeff * np.vdot(state, vector)
    return total, worst_tail


# ---------------------------------------------------------------------------
# Expectations


def heisenberg_expectation(
    P: MultiPoly,
    trajectory: Trajectory,
    hbar: float,
    cutoff: int,
    times: Sequence[float],
    psi,
    center: bool = False,
    rescale: bool = False,
    tail_epsilon: float = DEFAULT_TAIL_EPSILON,
    tail_margin: int = DEFAULT_TAIL_MARGIN,
) -> Expectation:
    """⟨P({A_ℏ(t_i), A_ℏ†(t_i)})⟩ in the state U_ℏ(α₀)ψ, optionally centred on α(t_i) and divided by √ℏ."""

    times = _check_times(P, times)
    H = trajectory.system.hamiltonian
    propagator = hamiltonian_propagator(H, hbar, cutoff)
    a, a_dag = ladder_matrices(cutoff, hbar)
    ladders = {THETA: a.matrix, THETA_STAR: a_dag.matrix}
    shifts = {}
    if center:
        for slot, t in enumerate(times, start=1):
            alpha = trajectory.at(t).alpha
            shifts[(slot, THETA)] = alpha
            shifts[(slot, THETA_STAR)] = alpha.conjugate()
    scale = 1.0 / math.sqrt(hbar) if rescale else 1.0
    state = weyl(trajectory.alpha0, hbar, cutoff, cache=True).matrix @ as_vector(psi, cutoff)

    def apply_letter(slot_letter: SlotLetter, vector: np.ndarray) -> Tuple[np.ndarray, float]:
        slot, letter = slot_letter
        t = times[slot - 1]
        moved = propagator.apply(t, 0.0, vector)
        tail = _tail(moved, cutoff, tail_margin)
        acted = ladders[letter] @ moved
        if center:
            acted = acted - shifts[slot_letter] * moved
        return scale * propagator.apply(0.0, t, acted), tail

    value, tail = _walk(P, state, apply_letter)
    truncated = tail > tail_epsilon
    if truncated:
        logger.warning("Heisenberg expectation at hbar=%.4g, M=%d has tail mass %.3e", hbar, cutoff, tail)
    return Expectation(complex(value), tail, truncated)


def fluctuation_cutoff(P: MultiPoly | NcPoly, psi) -> int:
    """Smallest cutoff on which the ladder products act on ψ without loss."""

    vector = psi.coeffs if isinstance(psi, FockState) else np.asarray(psi, dtype=complex)
    support = np.flatnonzero(vector)
    top = int(support[-1]) if support.size else 0
    return max(top + P.degree + 1, 1)


def fluctuation_expectation(
    P: MultiPoly,
    traj: Trajectory,
    times: Sequence[float],
    psi,
    hbar: float,
    mode: FluctuationMode = FluctuationMode.CENTERED_SCALED,
    cutoff: Optional[int] = None,
    tail_epsilon: float = DEFAULT_TAIL_EPSILON,
    tail_margin: int = 0,
) -> Expectation:
    """⟨P({[α(t_i)] + √ℏ a(t_i), [ᾱ(t_i)] + √ℏ a†(t_i)})⟩_ψ with a(t) = γ(t)a + δ(t)a†."""

    times = _check_times(P, times)
    mode = FluctuationMode(mode)
    if cutoff is None:
        cutoff = fluctuation_cutoff(P, psi)
    a, a_dag = ladder_matrices(cutoff)
    root = math.sqrt(hbar)
    matrices: Dict[SlotLetter, np.ndarray] = {}
    for slot, t in enumerate(times, start=1):
        sample = traj.at(t)
        lowered = root * (sample.gamma * a.matrix + sample.delta * a_dag.matrix)
        raised = root * (sample.delta.conjugate() * a.matrix + sample.gamma.conjugate() * a_dag.matrix)
        if mode is FluctuationMode.SHIFTED:
            identity = np.eye(cutoff + 1)
            lowered = lowered + sample.alpha * identity
            raised = raised + sample.alpha.conjugate() * identity
        matrices[(slot, THETA)] = lowered
        matrices[(slot, THETA_STAR)] = raised
    state = as_vector(psi, cutoff)

    def apply_letter(slot_letter: SlotLetter, vector: np.ndarray) -> Tuple[np.ndarray, float]:
        return matrices[slot_letter] @ vector, _tail(vector, cutoff, tail_margin) if tail_margin else 0.0

    value, tail = _walk(P, state, apply_letter)
    return Expectation(complex(value), tail, tail > tail_epsilon)


def classical_value(P: MultiPoly, traj: Trajectory, times: Sequence[float]) -> complex:
    """P({α(t_i), ᾱ(t_i)})."""

    times = _check_times(P, times)
    alphas = [traj.at(t).alpha for t in times]
    total = 0j
    for word, coeff in P.items():
        product = coeff
        for slot, letter in word:
            alpha = alphas[slot - 1]
            product *= alpha if letter is THETA else alpha.conjugate()
        total += product
    return complex(total)


def static_expectation(
    P: NcPoly,
    hbar: float,
    cutoff: int,
    alpha: complex,
    psi,
    center: bool = False,
    rescale: bool = False,
    tail_epsilon: float = DEFAULT_TAIL_EPSILON,
    tail_margin: int = DEFAULT_TAIL_MARGIN,
) -> Expectation:
    """⟨P(X, X†)⟩ in U_ℏ(α)ψ with X = a_ℏ, a_ℏ − α, or (a_ℏ − α)/√ℏ."""

    a, a_dag = ladder_matrices(cutoff, hbar)
    alpha = complex(alpha)
    scale = 1.0 / math.sqrt(hbar) if rescale else 1.0
    shift = {THETA: alpha, THETA_STAR: alpha.conjugate()} if center else {THETA: 0j, THETA_STAR: 0j}
    ladders = {THETA: a.matrix, THETA_STAR: a_dag.matrix}
    state = weyl(alpha, hbar, cutoff).matrix @ as_vector(psi, cutoff)

    def apply_letter(slot_letter: SlotLetter, vector: np.ndarray) -> Tuple[np.ndarray, float]:
        _, letter = slot_letter
        tail = _tail(vector, cutoff, tail_margin)
        return scale * (ladders[letter] @ vector - shift[letter] * vector), tail

    value, tail = _walk(MultiPoly.from_ncpoly(P), state, apply_letter)
    return Expectation(complex(value), tail, tail > tail_epsilon)


def variance(
    op_poly: NcPoly,
    hbar: float,
    cutoff: int,
    alpha: complex,
    psi,
    tail_epsilon: float = DEFAULT_TAIL_EPSILON,
    tail_margin: int = DEFAULT_TAIL_MARGIN,
    imag_tol: float = VARIANCE_IMAG_TOL,
) -> Variance:
    """Var_{U_ℏ(α)ψ}(P(a_ℏ, a_ℏ†)) = ‖Aφ‖² − ⟨A⟩² for symmetric P.

    Both expectations must be real to within ``imag_tol`` relative to their size.
    """

    if not op_poly.is_symmetric(1e-12):
        raise ValueError("Variance needs a symmetric observable")
    mean = static_expectation(op_poly, hbar, cutoff, alpha, psi, tail_epsilon=tail_epsilon, tail_margin=tail_margin)
    square = static_expectation(op_poly * op_poly, hbar, cutoff, alpha, psi, tail_epsilon=tail_epsilon, tail_margin=tail_margin)
    for part in (mean, square):
        imag = abs(part.value.imag)
        if imag > imag_tol * max(1.0, abs(part.value.real)):
            raise ComplexExpectationError(imag, imag_tol)
    value = float(square.value.real - mean.value.real**2)
    tail = max(mean.tail_mass, square.tail_mass)
    return Variance(value, tail, tail > tail_epsilon)


def compare_correlator(
    P: MultiPoly,
    trajectory: Trajectory,
    hbar: float,
    cutoff: int,
    times: Sequence[float],
    psi,
    center: bool = False,
    rescale: bool = False,
    tail_epsilon: float = DEFAULT_TAIL_EPSILON,
    tail_margin: int = DEFAULT_TAIL_MARGIN,
) -> CorrelatorResult:
    """Quantum left-hand side against its fluctuation prediction.

    Centred observables are compared with the CENTERED_SCALED prediction (at
    ℏ = 1 when rescaled); plain observables with the SHIFTED prediction.
    """

    lhs = heisenberg_expectation(P, trajectory, hbar, cutoff, times, psi, center, rescale, tail_epsilon, tail_margin)
    if center:
        rhs = fluctuation_expectation(
            P, trajectory, times, psi, 1.0 if rescale else hbar, FluctuationMode.CENTERED_SCALED
        )
    else:
        rhs = fluctuation_expectation(P, trajectory, times, psi, hbar, FluctuationMode.SHIFTED)
    return CorrelatorResult(
        lhs=lhs.value,
        rhs=rhs.value,
        classical=classical_value(P, trajectory, times),
        hbar=hbar,
        times=tuple(float(t) for t in times),
        truncated=lhs.truncated or rhs.truncated,
    )


__all__ = [
    "ComplexExpectationError",
    "CorrelatorResult",
    "Expectation",
    "FluctuationMode",
    "MultiPoly",
    "Variance",
    "classical_value",
    "compare_correlator",
    "fluctuation_cutoff",
    "fluctuation_expectation",
    "heisenberg_expectation",
    "static_expectation",
    "variance",
]

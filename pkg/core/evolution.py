"""Unitary propagators on the truncated Fock space.

Three mechanisms live here:

* ``SpectralPropagator``: e^{−iH(t−s)/ℏ} from one Hermitian eigendecomposition.
* ``MagnusPropagator``: i dU/dt = G(t)U for a time-dependent Hermitian G, stepped
  with a fourth-order commutator-free Magnus scheme.
* ``HeppFamily``: W_ℏ(t) = e^{if(t)/ℏ} U_ℏ(−α(t)) e^{−iH_ℏt/ℏ} U_ℏ(α₀), compared
  against the quadratic evolution W₀(t).
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Callable, ClassVar, NamedTuple, Optional, Tuple

import numpy as np
from scipy import integrate as sp_integrate
from scipy import linalg

from .alphabet import THETA, THETA_STAR
from .classical import ClassicalSystem, Trajectory, quadratic_coefficients
from .config import (
    DEFAULT_UNITARITY_TOL,
    DISPLACEMENT_SAFETY,
    HERMITIAN_TOL,
    MAGNUS_STEP_SAFETY,
    QUADRATIC_CUTOFF,
)
from .fock import (
    FockOperator,
    FockState,
    beta_norm,
    bound_K,
    interior_limit,
    ladder_matrices,
    monomial_matrix,
    number_operator,
    poly_matrix,
)
from .ncpoly import NcPoly, l1_norms, shift_expand
from .spectral_cache import get_cache

logger = logging.getLogger(__name__)

# Commutator-free fourth-order Magnus weights and Gauss nodes.
_CF4_A1 = (3.0 - 2.0 * math.sqrt(3.0)) / 12.0
_CF4_A2 = (3.0 + 2.0 * math.sqrt(3.0)) / 12.0
_CF4_C1 = 0.5 - math.sqrt(3.0) / 6.0
_CF4_C2 = 0.5 + math.sqrt(3.0) / 6.0

MAX_MAGNUS_STEPS = 200_000


class NonHermitianGeneratorError(ValueError):
    def __init__(self, asymmetry: float) -> None:
        self.asymmetry = asymmetry
        super().__init__(f"Generator is not Hermitian (max asymmetry {asymmetry:.3e})")


class InfeasibleDisplacementError(ValueError):
    """Raised when |α|²/ℏ is too large for the cutoff; ``required_cutoff`` suggests a fix."""

    def __init__(self, alpha: complex, hbar: float, cutoff: int, required_cutoff: int) -> None:
        self.alpha = alpha
        self.hbar = hbar
        self.cutoff = cutoff
        self.required_cutoff = required_cutoff
        super().__init__(
            f"Displacement |alpha|^2/hbar = {abs(alpha) ** 2 / hbar:.4g} is infeasible at "
            f"M={cutoff}; M >= {required_cutoff} is required"
        )


class StepSizeUnderflowError(RuntimeError):
    def __init__(self, steps: int, limit: int) -> None:
        self.steps = steps
        self.limit = limit
        super().__init__(f"Magnus stepping needs {steps} steps, above the limit of {limit}")


class PropagatorKind(str, Enum):
    TIME_INDEPENDENT = "time_independent"
    TIME_DEPENDENT = "time_dependent"


def as_vector(psi, cutoff: int) -> np.ndarray:
    """Coefficient vector of ``psi`` zero-padded to ``cutoff``."""

    values = psi.coeffs if isinstance(psi, FockState) else np.asarray(psi, dtype=complex).reshape(-1)
    if values.size > cutoff + 1:
        if np.any(values[cutoff + 1 :] != 0):
            raise ValueError(f"State with cutoff {values.size - 1} does not fit cutoff {cutoff}")
        values = values[: cutoff + 1]
    padded = np.zeros(cutoff + 1, dtype=complex)
    padded[: values.size] = values
    return padded


def _exp_hermitian(generator: np.ndarray, scale: float) -> np.ndarray:
    """exp(−i·scale·G) for Hermitian G."""

    eigenvalues, eigenvectors = linalg.eigh(generator)
    return (eigenvectors * np.exp(-1j * scale * eigenvalues)) @ eigenvectors.conj().T


def unitarity_defect(matrix: np.ndarray) -> float:
    identity = np.eye(matrix.shape[0])
    return float(np.linalg.norm(matrix.conj().T @ matrix - identity, 2))


# ---------------------------------------------------------------------------
# Propagators


class Propagator(ABC):
    kind: PropagatorKind
    cutoff: int

    @abstractmethod
    def matrix(self, t: float, s: float = 0.0) -> np.ndarray:
        """U(t, s) as a dense matrix."""

    def apply(self, t: float, s: float, psi) -> np.ndarray:
        return self.matrix(t, s) @ as_vector(psi, self.cutoff)

    def operator(self, t: float, s: float = 0.0) -> FockOperator:
        return FockOperator(self.matrix(t, s))

    def unitarity_defect(self, t: float, s: float = 0.0) -> float:
        return unitarity_defect(self.matrix(t, s))


@dataclass(frozen=True, eq=False)
class SpectralPropagator(Propagator):
    """e^{−iH(t−s)/ℏ} = V diag(e^{−iλ(t−s)/ℏ}) V*."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    hbar: float = 1.0
    kind: ClassVar[PropagatorKind] = PropagatorKind.TIME_INDEPENDENT

    @property
    def cutoff(self) -> int:  # type: ignore[override]
        return self.eigenvectors.shape[0] - 1

    def _phases(self, t: float, s: float) -> np.ndarray:
        return np.exp(-1j * self.eigenvalues * (t - s) / self.hbar)

    def matrix(self, t: float, s: float = 0.0) -> np.ndarray:
        vectors = self.eigenvectors
        return (vectors * self._phases(t, s)) @ vectors.conj().T

    def apply(self, t: float, s: float, psi) -> np.ndarray:
        vectors = self.eigenvectors
        return vectors @ (self._phases(t, s) * (vectors.conj().T @ as_vector(psi, self.cutoff)))


def spectral_propagator(H: FockOperator, hbar: float = 1.0, tol: float = HERMITIAN_TOL) -> SpectralPropagator:
    asymmetry = H.asymmetry()
    if asymmetry > tol:
        raise NonHermitianGeneratorError(asymmetry)
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    hermitian = 0.5 * (H.matrix + H.matrix.conj().T)
    eigenvalues, eigenvectors = linalg.eigh(hermitian)
    logger.debug("Diagonalised H at M=%d (lowest eigenvalue %.6g)", H.cutoff, eigenvalues[0])
    return SpectralPropagator(eigenvalues, eigenvectors, hbar)


class MagnusPropagator(Propagator):
    """i dU/dt = G(t) U with fixed steps satisfying h·‖G‖ ≤ ``step_safety``."""

    kind = PropagatorKind.TIME_DEPENDENT

    def __init__(
        self,
        generator: Callable[[float], np.ndarray],
        cutoff: int,
        step_safety: float = MAGNUS_STEP_SAFETY,
        unitarity_tol: float = DEFAULT_UNITARITY_TOL,
        max_steps: int = MAX_MAGNUS_STEPS,
    ) -> None:
        self.generator = generator
        self.cutoff = cutoff
        self.step_safety = step_safety
        self.unitarity_tol = unitarity_tol
        self.max_steps = max_steps

    def _norm_estimate(self, s: float, t: float) -> float:
        estimates = [np.abs(self.generator(tau)).sum(axis=1).max() for tau in (s, 0.5 * (s + t), t)]
        return float(max(estimates))

    def step_count(self, t: float, s: float) -> int:
        span = abs(t - s)
        steps = max(1, int(math.ceil(span * self._norm_estimate(min(s, t), max(s, t)) / self.step_safety)))
        if steps > self.max_steps:
            raise StepSizeUnderflowError(steps, self.max_steps)
        return steps

    def _evolve(self, t: float, s: float, target: np.ndarray) -> np.ndarray:
        steps = self.step_count(t, s)
        h = (t - s) / steps
        for index in range(steps):
            start = s + index * h
            g1 = self.generator(start + _CF4_C1 * h)
            g2 = self.generator(start + _CF4_C2 * h)
            target = _exp_hermitian(_CF4_A2 * g1 + _CF4_A1 * g2, h) @ target
            target = _exp_hermitian(_CF4_A1 * g1 + _CF4_A2 * g2, h) @ target
        logger.debug("Magnus evolution %.4g -> %.4g in %d steps at M=%d", s, t, steps, self.cutoff)
        return target

    def matrix(self, t: float, s: float = 0.0) -> np.ndarray:
        identity = np.eye(self.cutoff + 1, dtype=complex)
        if t == s:
            return identity
        if t < s:
            return self.matrix(s, t).conj().T
        result = self._evolve(t, s, identity)
        defect = unitarity_defect(result)
        if defect > self.unitarity_tol:
            logger.warning("Magnus propagator unitarity defect %.3e above %.1e", defect, self.unitarity_tol)
        return result

    def apply(self, t: float, s: float, psi) -> np.ndarray:
        vector = as_vector(psi, self.cutoff)
        if t == s:
            return vector
        if t < s:
            return self.matrix(t, s) @ vector
        return self._evolve(t, s, vector)


def truncated_evolution(
    gen: Callable[[float], NcPoly],
    hbar: float,
    cutoff: int,
    step_safety: float = MAGNUS_STEP_SAFETY,
) -> MagnusPropagator:
    """iℏ dU/dt = [P(t: a_ℏ, a_ℏ†)]_M U for a symmetric time-dependent generator."""

    if hbar <= 0:
        raise ValueError("hbar must be positive")

    def generator(t: float) -> np.ndarray:
        op = poly_matrix(gen(t), cutoff, hbar, exact_truncation=True)
        asymmetry = op.asymmetry()
        if asymmetry > HERMITIAN_TOL:
            raise NonHermitianGeneratorError(asymmetry)
        return op.matrix / hbar

    return MagnusPropagator(generator, cutoff, step_safety)


class QuadraticPropagator(MagnusPropagator):
    """W₀(t, s): generated by H₂(α(t): a, a†) at ℏ = 1."""

    def __init__(self, system: ClassicalSystem, trajectory: Trajectory, cutoff: int, step_safety: float = MAGNUS_STEP_SAFETY) -> None:
        self.system = system
        self.trajectory = trajectory
        self._lower = monomial_matrix((THETA, THETA), cutoff, 1.0, exact_truncation=True).matrix
        self._raise = monomial_matrix((THETA_STAR, THETA_STAR), cutoff, 1.0, exact_truncation=True).matrix
        self._number = number_operator(cutoff).matrix
        self._identity = np.eye(cutoff + 1, dtype=complex)
        super().__init__(self._generator, cutoff, step_safety)

    def _generator(self, t: float) -> np.ndarray:
        c_aa, c_ss, c_number, p_h = quadratic_coefficients(self.system, self.trajectory.at(t).alpha)
        return c_aa * self._lower + c_ss * self._raise + c_number * self._number + p_h * self._identity


def quadratic_evolution(
    sys: ClassicalSystem,
    traj: Trajectory,
    cutoff: int,
    step_safety: float = MAGNUS_STEP_SAFETY,
) -> QuadraticPropagator:
    if traj.system is not sys and traj.system.hamiltonian != sys.hamiltonian:
        raise ValueError("Trajectory was produced by a different classical system")
    return QuadraticPropagator(sys, traj, cutoff, step_safety)


# ---------------------------------------------------------------------------
# Weyl operators


def required_cutoff(alpha: complex, hbar: float, safety: float = DISPLACEMENT_SAFETY) -> int:
    return int(math.ceil(safety * abs(alpha) ** 2 / hbar))


def check_displacement(alpha: complex, hbar: float, cutoff: int, safety: float = DISPLACEMENT_SAFETY, strict: bool = False) -> bool:
    """True when |α|²/ℏ ≤ M/safety; otherwise warn, or raise when ``strict``."""

    needed = required_cutoff(alpha, hbar, safety)
    if needed <= cutoff:
        return True
    if strict:
        raise InfeasibleDisplacementError(alpha, hbar, cutoff, needed)
    logger.warning("Displacement %s at hbar=%.4g needs M >= %d (have %d)", alpha, hbar, needed, cutoff)
    return False


def _build_weyl(alpha: complex, hbar: float, cutoff: int) -> np.ndarray:
    a, a_dag = ladder_matrices(cutoff)
    z = alpha / math.sqrt(hbar)
    # i(z a† − z̄ a) is Hermitian; its exponential with −i gives exp(z a† − z̄ a).
    hermitian = 1j * (z * a_dag.matrix - z.conjugate() * a.matrix)
    return _exp_hermitian(hermitian, 1.0)


def weyl(
    alpha: complex,
    hbar: float,
    cutoff: int,
    safety: float = DISPLACEMENT_SAFETY,
    strict: bool = False,
    cache: bool = False,
) -> FockOperator:
    """U_ℏ(α) = exp((α a† − ᾱ a)/√ℏ) on the truncated space.

    ``cache`` keeps the matrix in the shared spectral cache; reserve it for
    displacements that are reused, such as the initial point α₀.
    """

    alpha = complex(alpha)
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    if alpha == 0:
        return FockOperator(np.eye(cutoff + 1, dtype=complex), hbar, frozenset({0}))
    check_displacement(alpha, hbar, cutoff, safety, strict)
    if cache:
        matrix = get_cache().get_or_build(
            ("weyl", alpha, float(hbar), cutoff), lambda: _build_weyl(alpha, hbar, cutoff)
        )
    else:
        matrix = _build_weyl(alpha, hbar, cutoff)
    return FockOperator(matrix, hbar)


# ---------------------------------------------------------------------------
# Hepp family


def l_hbar_generator(H: NcPoly, alpha: complex, hbar: float) -> NcPoly:
    """Σ_{k≥2} ℏ^{k/2−1} H_k(α: θ, θ*)."""

    if hbar <= 0:
        raise ValueError("hbar must be positive")
    parts = shift_expand(H, alpha)
    total = NcPoly()
    for degree, part in enumerate(parts):
        if degree >= 2 and not part.is_zero:
            total = total + part * hbar ** (degree / 2.0 - 1.0)
    return total


def hamiltonian_propagator(H: NcPoly, hbar: float, cutoff: int) -> SpectralPropagator:
    """Cached spectral propagator of the level-M truncation of H(a_ℏ, a_ℏ†)."""

    def build() -> SpectralPropagator:
        return spectral_propagator(poly_matrix(H, cutoff, hbar, exact_truncation=True), hbar)

    return get_cache().get_or_build(("hamiltonian", H, float(hbar), cutoff), build)


@dataclass(eq=False)
class HeppFamily:
    """W_ℏ(t) assembled from cached Weyl operators and the spectral data of H_ℏ."""

    hamiltonian: NcPoly
    trajectory: Trajectory
    hbar: float
    cutoff: int
    propagator: SpectralPropagator
    quadratic: QuadraticPropagator

    @property
    def alpha0(self) -> complex:
        return self.trajectory.alpha0

    @property
    def h_op(self) -> FockOperator:
        vectors, values = self.propagator.eigenvectors, self.propagator.eigenvalues
        return FockOperator((vectors * values) @ vectors.conj().T, self.hbar)

    def phase(self, t: float) -> float:
        return self.trajectory.at(t).f

    def weyl(self, alpha: complex) -> np.ndarray:
        return weyl(alpha, self.hbar, self.cutoff, cache=alpha == self.alpha0).matrix

    def apply(self, t: float, psi) -> np.ndarray:
        """W_ℏ(t)ψ on span{Ω₀ … Ω_M}."""

        sample = self.trajectory.at(t)
        vector = self.weyl(self.alpha0) @ as_vector(psi, self.cutoff)
        vector = self.propagator.apply(t, 0.0, vector)
        vector = self.weyl(sample.alpha).conj().T @ vector
        return np.exp(1j * sample.f / self.hbar) * vector

    def tail_mass(self, t: float, psi, margin: int) -> float:
        """Relative weight of e^{−iH_ℏt/ℏ}U_ℏ(α₀)ψ on the top ``margin`` levels."""

        vector = self.propagator.apply(t, 0.0, self.weyl(self.alpha0) @ as_vector(psi, self.cutoff))
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            return 0.0
        return float(np.linalg.norm(vector[max(self.cutoff - margin + 1, 0) :]) / norm)

    def apply_adjoint(self, t: float, psi) -> np.ndarray:
        """W_ℏ(t)*ψ."""

        sample = self.trajectory.at(t)
        vector = np.exp(-1j * sample.f / self.hbar) * as_vector(psi, self.cutoff)
        vector = self.weyl(sample.alpha) @ vector
        vector = self.propagator.apply(0.0, t, vector)
        return self.weyl(self.alpha0).conj().T @ vector

    def apply_between(self, t: float, s: float, psi) -> np.ndarray:
        """W_ℏ(t, s)ψ = W_ℏ(t) W_ℏ(s)* ψ."""

        return self.apply(t, self.apply_adjoint(s, psi))

    def matrix(self, t: float) -> np.ndarray:
        sample = self.trajectory.at(t)
        evolved = self.propagator.matrix(t, 0.0) @ self.weyl(self.alpha0)
        return np.exp(1j * sample.f / self.hbar) * (self.weyl(sample.alpha).conj().T @ evolved)

    def w0_apply(self, t: float, psi) -> np.ndarray:
        """W₀(t)ψ computed at the quadratic cutoff.

        Shared across the families of a sweep through the spectral cache.
        """

        cutoff = self.quadratic.cutoff
        vector = as_vector(psi, cutoff)
        key = ("w0", self.hamiltonian, self.alpha0, float(t), cutoff, vector.tobytes())

        def build() -> np.ndarray:
            evolved = self.quadratic.apply(t, 0.0, vector)
            evolved.setflags(write=False)
            return evolved

        return get_cache().get_or_build(key, build)

    def w_distance(self, t: float, psi) -> float:
        """‖(W_ℏ(t) − W₀(t))ψ‖ with both vectors padded to a common cutoff."""

        common = max(self.cutoff, self.quadratic.cutoff)
        full = as_vector(self.apply(t, psi), common)
        quadratic = as_vector(self.w0_apply(t, psi), common)
        return float(np.linalg.norm(full - quadratic))


def hepp_family(
    H: NcPoly,
    alpha0: complex,
    hbar: float,
    cutoff: int,
    traj: Trajectory,
    quadratic_cutoff: int = QUADRATIC_CUTOFF,
    safety: float = DISPLACEMENT_SAFETY,
) -> HeppFamily:
    if traj.system.hamiltonian != H:
        raise ValueError("Trajectory was integrated for a different Hamiltonian")
    if complex(alpha0) != traj.alpha0:
        raise ValueError("Trajectory starts at %s, not %s" % (traj.alpha0, alpha0))
    check_displacement(traj.alpha_max(), hbar, cutoff, safety, strict=True)
    propagator = hamiltonian_propagator(H, hbar, cutoff)
    quadratic = quadratic_evolution(traj.system, traj, quadratic_cutoff)
    logger.info("Hepp family ready: hbar=%.4g, M=%d, quadratic M=%d", hbar, cutoff, quadratic_cutoff)
    return HeppFamily(H, traj, float(hbar), cutoff, propagator, quadratic)


def hepp_ladder(family: HeppFamily, t: float) -> Tuple[FockOperator, FockOperator]:
    """(a(ℏ:t), a†(ℏ:t)) = W_ℏ(t)* (a, a†) W_ℏ(t) with unscaled ladders."""

    w = family.matrix(t)
    a, a_dag = ladder_matrices(family.cutoff)
    lowered = w.conj().T @ a.matrix @ w
    raised = w.conj().T @ a_dag.matrix @ w
    return FockOperator(lowered, 1.0), FockOperator(raised, 1.0)


# ---------------------------------------------------------------------------
# Diagnostics


class GeneratorResidual(NamedTuple):
    absolute: float
    relative: float


def generator_residual(family: HeppFamily, t: float, psi, eps: float = 1e-4) -> GeneratorResidual:
    """Finite-difference check of i ∂_t W_ℏ(t)ψ = L_ℏ(t) W_ℏ(t)ψ on interior rows."""

    sample = family.trajectory.at(t)
    forward = family.apply(t + eps, psi)
    backward = family.apply(t - eps, psi)
    lhs = 1j * (forward - backward) / (2.0 * eps)
    generator = l_hbar_generator(family.hamiltonian, sample.alpha, family.hbar)
    rhs = poly_matrix(generator, family.cutoff, 1.0, exact_truncation=True).matrix @ family.apply(t, psi)
    rows = max(interior_limit(family.hamiltonian, family.cutoff), 0) + 1
    absolute = float(np.linalg.norm((lhs - rhs)[:rows]))
    scale = float(np.linalg.norm(rhs[:rows]))
    return GeneratorResidual(absolute, absolute / scale if scale > 0 else absolute)


class NumberMoment(NamedTuple):
    evolved: float
    initial_weighted: float


def number_moment(family: HeppFamily, t: float, psi, beta: float) -> NumberMoment:
    """(‖𝒩^β W_ℏ(t)ψ‖, ‖ψ‖_{βd/2}) for the number-growth estimate."""

    evolved = family.apply(t, psi)
    weights = np.arange(evolved.size, dtype=float) ** beta
    degree = family.hamiltonian.degree
    initial = beta_norm(as_vector(psi, family.cutoff), beta * degree / 2.0)
    return NumberMoment(float(np.linalg.norm(weights * evolved)), initial)


def norm_growth_bound(
    gen: Callable[[float], NcPoly],
    beta: float,
    cutoff: int,
    hbar: float,
    t: float,
    s: float = 0.0,
    samples: int = 65,
) -> float:
    """exp(K(β,d) Σ_k ℏ^{k/2−1} (M+1)^{max(k/2−1, 0)} ∫|P_k|), the growth envelope of ‖U^M‖_{β→β}."""

    grid = np.linspace(min(s, t), max(s, t), samples)
    polys = [gen(float(tau)) for tau in grid]
    degree = max((poly.degree for poly in polys), default=0)
    if degree < 1 or beta == 0:
        return 1.0
    norms = np.zeros((samples, degree + 1))
    for row, poly in enumerate(polys):
        by_degree = l1_norms(poly).by_degree
        norms[row, : len(by_degree)] = by_degree
    integrals = sp_integrate.trapezoid(norms, grid, axis=0) if samples > 1 else np.zeros(degree + 1)
    exponent = 0.0
    for k in range(1, degree + 1):
        exponent += hbar ** (k / 2.0 - 1.0) * (cutoff + 1) ** max(k / 2.0 - 1.0, 0.0) * integrals[k]
    exponent *= bound_K(beta, degree)
    try:
        return math.exp(exponent)
    except OverflowError:
        return math.inf


__all__ = [
    "GeneratorResidual",
    "as_vector",
    "HeppFamily",
    "InfeasibleDisplacementError",
    "MagnusPropagator",
    "NonHermitianGeneratorError",
    "NumberMoment",
    "Propagator",
    "PropagatorKind",
    "QuadraticPropagator",
    "SpectralPropagator",
    "StepSizeUnderflowError",
    "check_displacement",
    "generator_residual",
    "hamiltonian_propagator",
    "hepp_family",
    "hepp_ladder",
    "l_hbar_generator",
    "norm_growth_bound",
    "number_moment",
    "quadratic_evolution",
    "required_cutoff",
    "spectral_propagator",
    "truncated_evolution",
    "unitarity_defect",
    "weyl",
]

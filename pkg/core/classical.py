"""Classical flow of a Hamiltonian symbol, its linearisation and the phase integral.

The joint real system integrated here carries α(t), the Bogoliubov pair
(γ(t), δ(t)) and the phase f(t):

    α̇ = −i ∂H/∂z̄(α)
    γ̇ = −i (v γ + u δ̄),   δ̇ = −i (v δ + u γ̄)
    ḟ = H(α) − Im(α · conj(α̇))

with u = ∂²H/∂z̄² and v = ∂²H/∂z∂z̄ evaluated along α(t).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate as sp_integrate

from .alphabet import THETA, THETA_STAR, Word
from .config import DEFAULT_ODE_TOL
from .grammar import format_word
from .ncpoly import CPoly, NcPoly, shift_coefficients, symbol, symbol_derivative

logger = logging.getLogger(__name__)


class NonSymmetricHamiltonianError(ValueError):
    """Raised when H ≠ H*; ``pairs`` lists the offending (w, c_w, w*, c_{w*})."""

    def __init__(self, pairs: Sequence[Tuple[Word, complex, Word, complex]]) -> None:
        self.pairs = list(pairs)

        listing = "; ".join(
            f"[{format_word(w) or '1'}]={c:g} vs [{format_word(p) or '1'}]={pc:g}"
            for w, c, p, pc in self.pairs[:8]
        )
        super().__init__(f"Hamiltonian is not symmetric: {listing}")


class HamiltonianDegreeError(ValueError):
    """Raised when the Hamiltonian has degree below two."""


class IntegrationError(RuntimeError):
    """Raised when the integrator stops before the final time."""

    def __init__(self, last_time: float, message: str) -> None:
        self.last_time = last_time
        super().__init__(f"Integration stopped at t={last_time:.6g}: {message}")


# ---------------------------------------------------------------------------
# System


@dataclass(frozen=True)
class ClassicalSystem:
    hamiltonian: NcPoly
    h_cl: CPoly
    dh_dzbar: CPoly
    u_poly: CPoly
    v_poly: CPoly
    quadratic: Tuple[Tuple[Word, CPoly], ...] = field(default=(), repr=False)

    @property
    def degree(self) -> int:
        return self.hamiltonian.degree

    def energy(self, alpha: complex) -> float:
        return float(self.h_cl.evaluate(alpha).real)

    def quadratic_part(self, alpha: complex) -> NcPoly:
        """H₂(α: θ, θ*), the degree-two part of H(θ+α, θ*+ᾱ)."""

        return NcPoly({word: cpoly.evaluate(alpha) for word, cpoly in self.quadratic})


def build_system(h: NcPoly, tol: float = 1e-12) -> ClassicalSystem:
    """Derive the symbol and its Wirtinger derivatives from a symmetric ``h``."""

    pairs = h.asymmetric_pairs(tol)
    if pairs:
        raise NonSymmetricHamiltonianError(pairs)
    if h.degree < 2:
        raise HamiltonianDegreeError(f"Hamiltonian degree {h.degree} is below 2")
    h_cl = symbol(h)
    layers = shift_coefficients(h)
    system = ClassicalSystem(
        hamiltonian=h,
        h_cl=h_cl,
        dh_dzbar=symbol_derivative(h_cl, 0, 1),
        u_poly=symbol_derivative(h_cl, 0, 2),
        v_poly=symbol_derivative(h_cl, 1, 1),
        quadratic=layers[2],
    )
    logger.debug("Built classical system for degree-%d Hamiltonian (%d terms)", h.degree, len(h))
    return system


def vector_field(sys: ClassicalSystem, alpha: complex) -> complex:
    """α̇ = −i ∂H/∂z̄(α)."""

    return complex(-1j * sys.dh_dzbar.evaluate(alpha))


def linearization_coeffs(sys: ClassicalSystem, alpha: complex) -> Tuple[complex, float]:
    u = complex(sys.u_poly.evaluate(alpha))
    v = complex(sys.v_poly.evaluate(alpha))
    if abs(v.imag) > 1e-12 * (1.0 + abs(v)):
        logger.warning("Imaginary part %.3e in v at alpha=%s", v.imag, alpha)
    return u, float(v.real)


def quadratic_coefficients(sys: ClassicalSystem, alpha: complex) -> Tuple[complex, complex, complex, complex]:
    """Normal-ordered H₂(α: a, a†) at ℏ = 1.

    Returns the coefficients of a², a†², a†a and the scalar p_H left over from
    reordering a a† = a†a + 1.
    """

    part = sys.quadratic_part(alpha)

    c_aa = part.coefficient((THETA, THETA))
    c_ss = part.coefficient((THETA_STAR, THETA_STAR))
    c_sa = part.coefficient((THETA_STAR, THETA))
    c_as = part.coefficient((THETA, THETA_STAR))
    return c_aa, c_ss, c_sa + c_as, c_as


# ---------------------------------------------------------------------------
# Trajectories


class TrajectorySample(NamedTuple):
    t: float
    alpha: complex
    gamma: complex
    delta: complex
    f: float

    @property
    def symplectic_det(self) -> float:
        return abs(self.gamma) ** 2 - abs(self.delta) ** 2


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of (α, γ, δ, f) on a time grid plus the integrator's dense output."""

    system: ClassicalSystem
    alpha0: complex
    times: np.ndarray
    states: np.ndarray
    tol: float = DEFAULT_ODE_TOL
    dense: Optional[sp_integrate.OdeSolution] = field(default=None, repr=False)

    @property
    def samples(self) -> List[TrajectorySample]:
        return [_unpack(t, y) for t, y in zip(self.times, self.states.T)]

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> TrajectorySample:
        """Dense-output sample at any ``t`` within the integrated range."""

        t = float(t)
        if t < -1e-12 or t > self.t_max + 1e-12:
            raise ValueError(f"Time {t} outside the trajectory range [0, {self.t_max}]")
        if self.dense is None:
            return _unpack(t, self.states[:, 0])
        return _unpack(t, self.dense(min(max(t, 0.0), self.t_max)))

    def alpha_max(self, resolution: int = 400) -> float:
        """sup_t |α(t)| estimated on the samples and a uniform dense grid."""

        peak = float(np.max(np.abs(self.states[0] + 1j * self.states[1])))
        if self.dense is not None and self.t_max > 0:
            grid = np.linspace(0.0, self.t_max, resolution)
            values = self.dense(grid)
            peak = max(peak, float(np.max(np.abs(values[0] + 1j * values[1]))))
        return peak

    def energies(self) -> np.ndarray:
        alphas = self.states[0] + 1j * self.states[1]
        return np.real(self.system.h_cl.evaluate(alphas))

    def rows(self) -> List[Tuple[float, ...]]:
        """CSV rows: t, re/im α, re/im γ, re/im δ, f, energy."""

        energies = self.energies()
        return [
            (float(t), *(float(x) for x in y), float(e))
            for t, y, e in zip(self.times, self.states.T, energies)
        ]


def _unpack(t: float, y: np.ndarray) -> TrajectorySample:
    return TrajectorySample(
        float(t),
        complex(y[0], y[1]),
        complex(y[2], y[3]),
        complex(y[4], y[5]),
        float(y[6]),
    )


def _rhs(sys: ClassicalSystem):
    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        alpha = complex(y[0], y[1])
        gamma = complex(y[2], y[3])
        delta = complex(y[4], y[5])
        alpha_dot = vector_field(sys, alpha)
        u, v = linearization_coeffs(sys, alpha)
        gamma_dot = -1j * (v * gamma + u * delta.conjugate())
        delta_dot = -1j * (v * delta + u * gamma.conjugate())
        f_dot = sys.energy(alpha) - (alpha * alpha_dot.conjugate()).imag
        return np.array(
            [
                alpha_dot.real,
                alpha_dot.imag,
                gamma_dot.real,
                gamma_dot.imag,
                delta_dot.real,
                delta_dot.imag,
                f_dot,
            ]
        )

    return rhs


def integrate(
    sys: ClassicalSystem,
    alpha0: complex,
    t_grid: Iterable[float],
    tol: float = DEFAULT_ODE_TOL,
) -> Trajectory:
    """Integrate the joint system from t = 0 with DOP853 and dense output."""

    if tol <= 0:
        raise ValueError("Tolerance must be positive")
    times = np.asarray(sorted({float(t) for t in t_grid}), dtype=float)
    if times.size == 0 or times[0] != 0.0:
        raise ValueError("Time grid must contain 0 and no negative times")
    alpha0 = complex(alpha0)
    y0 = np.array([alpha0.real, alpha0.imag, 1.0, 0.0, 0.0, 0.0, 0.0])
    t_end = float(times[-1])
    if t_end == 0.0:
        return Trajectory(sys, alpha0, times, y0[:, None].copy(), tol, None)

    solution = sp_integrate.solve_ivp(
        _rhs(sys),
        (0.0, t_end),
        y0,
        method="DOP853",
        t_eval=times,
        dense_output=True,
        rtol=tol,
        atol=tol,
    )
    if solution.status != 0:
        last = float(solution.t[-1]) if solution.t.size else 0.0
        raise IntegrationError(last, solution.message)
    logger.debug(
        "Integrated alpha0=%s to t=%.4g: nfev=%d, accepted steps=%d",
        alpha0,
        t_end,
        solution.nfev,
        len(solution.sol.ts) - 1,
    )
    return Trajectory(sys, alpha0, solution.t, solution.y, tol, solution.sol)


def flow_map(sys: ClassicalSystem, alpha0: complex, t: float, tol: float = DEFAULT_ODE_TOL) -> complex:
    """Φ(t, α₀): the classical solution at time ``t``."""

    return integrate(sys, alpha0, (0.0, t), tol).at(t).alpha


# ---------------------------------------------------------------------------
# Diagnostics


class OrbitBound(NamedTuple):
    max_abs_sq: float
    bound: float
    within: bool


def orbit_bound_report(traj: Trajectory, c1: float, c: float) -> OrbitBound:
    """Compare sup |α(t)|² with C₁(H(α₀) + C) from a coercivity estimate."""

    peak = traj.alpha_max() ** 2
    bound = c1 * (traj.system.energy(traj.alpha0) + c)
    return OrbitBound(peak, bound, peak <= bound)


__all__ = [
    "ClassicalSystem",
    "HamiltonianDegreeError",
    "IntegrationError",
    "NonSymmetricHamiltonianError",
    "OrbitBound",
    "Trajectory",
    "TrajectorySample",
    "build_system",
    "flow_map",
    "integrate",
    "linearization_coeffs",
    "orbit_bound_report",
    "quadratic_coefficients",
    "vector_field",
]

"""Registry and runner for the numerical invariant suite.

Each invariant is a function of a :class:`SuiteContext` returning the largest
residual it observed together with the bound it must respect. Invariants that
cannot run at the requested sizes raise :class:`SkipInvariant`; any other
exception is recorded as a failure instead of aborting the suite.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .alphabet import THETA, THETA_STAR, Word, involution, shift
from .classical import build_system, flow_map, integrate, vector_field
from .config import DEFAULT_SEED, FAULT_PERTURBATION, INVARIANT_SIZES, QUADRATIC_CUTOFF, CutoffPolicy
from .correlators import FluctuationMode, MultiPoly, fluctuation_cutoff, fluctuation_expectation, static_expectation
from .evolution import (
    QuadraticPropagator,
    as_vector,
    hepp_family,
    spectral_propagator,
)
from .fock import (
    FockState,
    LadderCoeff,
    hermitian_check,
    interior_limit,
    ladder_matrices,
    monomial_matrix,
    op_norm,
    poly_matrix,
)
from .grammar import parse
from .ncpoly import NcPoly, l1_norms, normal_order, normal_order_leading, reshift, shift_expand, symbol

logger = logging.getLogger(__name__)

EXAMPLE_HAMILTONIAN = "a* a + (0.5) (a* a)(a* a)"
MAX_WORD_LENGTH = 4
BETAS = (0.0, 1.0, 2.0)
ORACLE_SAMPLES = 50
ORACLE_CUTOFF = 24


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIPPED = "SKIPPED"


class Measurement(NamedTuple):
    residual: float
    bound: float


class SkipInvariant(Exception):
    """Raised by an invariant that has nothing to check at the requested sizes."""


@dataclass
class SuiteContext:
    seed: int
    sizes: Tuple[int, ...]
    fault_injection: bool = False
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def usable_sizes(self, minimum: int) -> List[int]:
        usable = [m for m in self.sizes if m >= minimum]
        if not usable:
            raise SkipInvariant(f"no size reaches {minimum}")
        return usable

    def ladders(self, cutoff: int, hbar: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
        a, a_dag = ladder_matrices(cutoff, hbar)
        if not self.fault_injection:
            return a.matrix, a_dag.matrix
        perturbed = a.matrix * (1.0 + FAULT_PERTURBATION)
        return perturbed, perturbed.conj().T


@dataclass(frozen=True)
class InvariantResult:
    name: str
    max_residual: float
    bound: float
    verdict: Verdict
    detail: str = ""

    def as_row(self) -> Tuple[str, float, float, str]:
        return (self.name, self.max_residual, self.bound, self.verdict.value)


@dataclass(frozen=True)
class InvariantLedger:
    results: Tuple[InvariantResult, ...]
    seed: int = DEFAULT_SEED
    sizes: Tuple[int, ...] = INVARIANT_SIZES

    @property
    def failures(self) -> List[InvariantResult]:
        return [result for result in self.results if result.verdict is Verdict.FAIL]

    @property
    def passed(self) -> bool:
        return not self.failures

    def get(self, name: str) -> Optional[InvariantResult]:
        for result in self.results:
            if result.name == name:
                return result
        return None


InvariantFn = Callable[[SuiteContext], Measurement]
_REGISTRY: Dict[str, InvariantFn] = {}


def invariant(name: str) -> Callable[[InvariantFn], InvariantFn]:
    """Register ``fn`` under ``name``; the suite runs invariants in registration order."""

    def decorator(fn: InvariantFn) -> InvariantFn:
        if name in _REGISTRY:
            raise ValueError(f"Invariant {name!r} registered twice")
        _REGISTRY[name] = fn
        return fn

    return decorator


def registered_invariants() -> List[str]:
    return list(_REGISTRY)


# ---------------------------------------------------------------------------
# Helpers


def all_words(max_length: int, min_length: int = 1) -> List[Word]:
    words: List[Word] = []
    for length in range(min_length, max_length + 1):
        words.extend(itertools.product((THETA, THETA_STAR), repeat=length))
    return words


def random_poly(rng: np.random.Generator, max_degree: int = MAX_WORD_LENGTH, n_terms: int = 6) -> NcPoly:
    terms: Dict[Word, complex] = {}
    for _ in range(n_terms):
        length = int(rng.integers(0, max_degree + 1))
        word = tuple(THETA if bit else THETA_STAR for bit in rng.integers(0, 2, size=length))
        terms[word] = terms.get(word, 0j) + complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
    return NcPoly(terms)


def random_symmetric_poly(rng: np.random.Generator, max_degree: int = MAX_WORD_LENGTH, n_terms: int = 6) -> NcPoly:
    P = random_poly(rng, max_degree, n_terms)
    return (P + P.star()) * 0.5


def random_alpha(rng: np.random.Generator, radius: float = 1.0) -> complex:
    return complex(rng.uniform(-radius, radius), rng.uniform(-radius, radius))


def _coefficient_gap(P: NcPoly, Q: NcPoly) -> float:
    return max((abs(c) for _, c in (P - Q).items()), default=0.0)


def _ratio(measured: float, bound: float) -> float:
    if bound > 0:
        return measured / bound
    return 0.0 if measured <= 1e-12 else math.inf


RATIO_BOUND = 1.0 + 1e-9


# ---------------------------------------------------------------------------
# Algebra


@invariant("ncpoly.antihomomorphism")
def _antihomomorphism(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for _ in range(20):
        P, Q = random_poly(ctx.rng), random_poly(ctx.rng)
        worst = max(worst, _coefficient_gap((P * Q).star(), Q.star() * P.star()))
        worst = max(worst, _coefficient_gap(P.star().star(), P))
    return Measurement(worst, 1e-12)


@invariant("ncpoly.symbol_homomorphism")
def _symbol_homomorphism(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for _ in range(20):
        P, Q = random_poly(ctx.rng), random_poly(ctx.rng)
        gap = symbol(P * Q) - symbol(P) * symbol(Q)
        worst = max(worst, max((abs(c) for c in gap.terms.values()), default=0.0))
    return Measurement(worst, 1e-12)


@invariant("ncpoly.l1_submultiplicative")
def _l1_submultiplicative(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for _ in range(20):
        P, Q = random_poly(ctx.rng), random_poly(ctx.rng)
        worst = max(worst, _ratio(l1_norms(P * Q).total, l1_norms(P).total * l1_norms(Q).total))
    return Measurement(worst, RATIO_BOUND)


@invariant("ncpoly.shift_reconstruction")
def _shift_reconstruction(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for _ in range(20):
        P = random_poly(ctx.rng)
        alpha = random_alpha(ctx.rng)
        worst = max(worst, _coefficient_gap(reshift(shift_expand(P, alpha), -alpha), P))
    return Measurement(worst, 1e-12)


@invariant("ncpoly.symmetry_propagation")
def _symmetry_propagation(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for _ in range(20):
        P = random_symmetric_poly(ctx.rng)
        alpha = random_alpha(ctx.rng, 2.0)
        for part in shift_expand(P, alpha):
            worst = max(worst, _coefficient_gap(part, part.star()))
    return Measurement(worst, 1e-12)


@invariant("ncpoly.normal_order_oracle")
def _normal_order_oracle(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for _ in range(ORACLE_SAMPLES):
        P = random_symmetric_poly(ctx.rng)
        ordered = normal_order(P)
        worst = max(worst, _coefficient_gap(ordered.hbar_part(0), normal_order_leading(P)))
        for hbar in (1.0, 0.3):
            specialised = ordered.specialize(hbar)
            rows = ORACLE_CUTOFF - P.degree + 1
            direct = poly_matrix(P, ORACLE_CUTOFF, hbar).matrix[:rows, :rows]
            normal = poly_matrix(specialised, ORACLE_CUTOFF, hbar).matrix[:rows, :rows]
            worst = max(worst, float(np.max(np.abs(direct - normal))))
    return Measurement(worst, 1e-10)


# ---------------------------------------------------------------------------
# Classical flow


def _example_system():
    return build_system(parse(EXAMPLE_HAMILTONIAN))


@invariant("classical.vector_field_gradient")
def _vector_field_gradient(ctx: SuiteContext) -> Measurement:
    system = _example_system()
    eps = 1e-6
    worst = 0.0
    for _ in range(100):
        radius = ctx.rng.uniform(0, 2)
        alpha = radius * complex(math.cos(angle := ctx.rng.uniform(0, 2 * math.pi)), math.sin(angle))
        dx = (system.energy(alpha + eps) - system.energy(alpha - eps)) / (2 * eps)
        dy = (system.energy(alpha + 1j * eps) - system.energy(alpha - 1j * eps)) / (2 * eps)
        expected = -1j * 0.5 * (dx + 1j * dy)
        worst = max(worst, abs(vector_field(system, alpha) - expected))
    return Measurement(worst, 1e-6)


@invariant("classical.symplectic_determinant")
def _symplectic_determinant(ctx: SuiteContext) -> Measurement:
    trajectory = integrate(_example_system(), 1.0, np.linspace(0.0, 10.0, 101), 1e-10)
    worst = max(abs(sample.symplectic_det - 1.0) for sample in trajectory.samples)
    return Measurement(worst, 1e-8)


@invariant("classical.energy_drift")
def _energy_drift(ctx: SuiteContext) -> Measurement:
    system = _example_system()
    trajectory = integrate(system, 1.0, np.linspace(0.0, 10.0, 101), 1e-10)
    energies = trajectory.energies()
    drift = float(np.max(np.abs(energies - energies[0])))
    return Measurement(drift / (1.0 + abs(energies[0])), 1e-8)


@invariant("classical.closed_form_rotation")
def _closed_form_rotation(ctx: SuiteContext) -> Measurement:
    trajectory = integrate(_example_system(), 1.0, np.linspace(0.0, 10.0, 101), 1e-10)
    worst = max(abs(sample.alpha - np.exp(-2j * sample.t)) for sample in trajectory.samples)
    return Measurement(float(worst), 1e-7)


@invariant("classical.flow_differential")
def _flow_differential(ctx: SuiteContext) -> Measurement:
    system = _example_system()
    alpha0, t, eps = 1.0 + 0j, 1.0, 1e-5
    sample = integrate(system, alpha0, (0.0, t)).at(t)
    worst = 0.0
    for z in (1.0 + 0j, 1j):
        difference = (flow_map(system, alpha0 + eps * z, t) - flow_map(system, alpha0 - eps * z, t)) / (2 * eps)
        worst = max(worst, abs(difference - (sample.gamma * z + sample.delta * z.conjugate())))
    return Measurement(worst, 1e-4)


# ---------------------------------------------------------------------------
# Fock space


@invariant("fock.ccr")
def _ccr(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for cutoff in ctx.usable_sizes(2):
        for hbar in (1.0, 0.3):
            a, a_dag = ctx.ladders(cutoff, hbar)
            commutator = a @ a_dag - a_dag @ a
            block = commutator[: cutoff - 1, : cutoff - 1] - hbar * np.eye(cutoff - 1)
            worst = max(worst, float(np.max(np.abs(block))))
    return Measurement(worst, 1e-12)


@invariant("fock.diagonal_shift")
def _diagonal_shift(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for cutoff in ctx.usable_sizes(MAX_WORD_LENGTH):
        rows, cols = np.indices((cutoff + 1, cutoff + 1))
        for word in all_words(MAX_WORD_LENGTH):
            matrix = monomial_matrix(word, cutoff).matrix
            off = matrix[(rows - cols) != shift(word)]
            worst = max(worst, float(np.max(np.abs(off), initial=0.0)))
    return Measurement(worst, 0.0)


@invariant("fock.ladder_coefficient_bound")
def _ladder_coefficient_bound(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    cutoff = max(ctx.usable_sizes(MAX_WORD_LENGTH))
    n = np.arange(cutoff + 1)
    for word in all_words(MAX_WORD_LENGTH):
        coeff = LadderCoeff(word)
        values = coeff(n)
        bound = coeff.bound(n)
        worst = max(worst, float(np.max((values - bound) / np.maximum(bound, 1.0))))
        worst = max(worst, float(np.max(-values)))
        adjoint = LadderCoeff(involution(word))(n)
        worst = max(worst, float(np.max(np.abs(adjoint - coeff(n - coeff.shift)))))
    return Measurement(max(worst, 0.0), 1e-12)


@invariant("fock.monomial_norm_bound")
def _monomial_norm_bound(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for cutoff in ctx.usable_sizes(MAX_WORD_LENGTH):
        for word in all_words(MAX_WORD_LENGTH):
            k = len(word)
            matrix = monomial_matrix(word, cutoff, exact_truncation=True)
            for beta in BETAS:
                bound = math.sqrt(k**k * (k + 1) ** (2 * beta))
                worst = max(worst, _ratio(op_norm(matrix, beta + k / 2.0, beta), bound))
    return Measurement(worst, RATIO_BOUND)


@invariant("fock.truncated_norm_bound")
def _truncated_norm_bound(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for cutoff in ctx.usable_sizes(MAX_WORD_LENGTH):
        for word in all_words(MAX_WORD_LENGTH):
            k, ell = len(word), abs(shift(word))
            matrix = monomial_matrix(word, cutoff, exact_truncation=True)
            for beta in BETAS:
                bound = (cutoff + k) ** (k / 2.0) * (1 + ell) ** beta
                worst = max(worst, _ratio(op_norm(matrix, beta, beta), bound))
    return Measurement(worst, RATIO_BOUND)


@invariant("fock.truncation_tail_bound")
def _truncation_tail_bound(ctx: SuiteContext) -> Measurement:
    """‖Ā − A_M‖_{α→β} ≤ √(k^k (k+1)^{2β}) (M−k+2)^{β+k/2−α} for α > β + k/2."""

    worst = 0.0
    for cutoff in ctx.usable_sizes(MAX_WORD_LENGTH):
        for word in all_words(MAX_WORD_LENGTH):
            k = len(word)
            ambient = cutoff + 4 * k + 8
            full = monomial_matrix(word, ambient, exact_truncation=True).matrix.copy()
            full[:, ambient - k + 1 :] = 0.0
            truncated = np.zeros_like(full)
            truncated[: cutoff + 1, : cutoff + 1] = full[: cutoff + 1, : cutoff + 1]
            difference = full - truncated
            for beta in BETAS:
                constant = math.sqrt(k**k * (k + 1) ** (2 * beta))
                for extra in (0.5, 1.0):
                    alpha_w = beta + k / 2.0 + extra
                    bound = constant * (cutoff - k + 2) ** (beta + k / 2.0 - alpha_w)
                    worst = max(worst, _ratio(op_norm(difference, alpha_w, beta), bound))
    return Measurement(worst, RATIO_BOUND)


@invariant("fock.commutator_bound")
def _commutator_bound(ctx: SuiteContext) -> Measurement:
    worst = 0.0
    for cutoff in ctx.usable_sizes(MAX_WORD_LENGTH):
        weights = np.arange(cutoff + 1, dtype=float) + 1.0
        for word in all_words(MAX_WORD_LENGTH):
            k, ell = len(word), abs(shift(word))
            columns = interior_limit(word, cutoff) + 1
            if columns < 1:
                continue
            matrix = monomial_matrix(word, cutoff, exact_truncation=True).matrix
            for beta in BETAS:
                power = weights**beta
                commutator = power[:, None] * matrix - matrix * power[None, :]
                scaled = commutator / (power * weights ** (k / 2.0 - 1.0))[None, :]
                block = scaled[:, :columns]
                measured = float(linalg.svdvals(block)[0]) if np.any(block) else 0.0
                bound = beta * k ** (k / 2.0) * ell * (1 + ell) ** abs(beta - 1)
                worst = max(worst, _ratio(measured, bound))
    return Measurement(worst, RATIO_BOUND)


# ---------------------------------------------------------------------------
# Propagators


@invariant("evolution.unitarity")
def _unitarity(ctx: SuiteContext) -> Measurement:
    H = parse(EXAMPLE_HAMILTONIAN)
    cutoff = max(ctx.usable_sizes(MAX_WORD_LENGTH))
    hamiltonian = poly_matrix(H, cutoff, 0.1, exact_truncation=True)
    spectral = spectral_propagator(hamiltonian, 0.1)
    worst = hermitian_check(hamiltonian)
    for t, s in ctx.rng.uniform(0.0, 5.0, size=(20, 2)):
        worst = max(worst, spectral.unitarity_defect(t, s))
    system = build_system(H)
    trajectory = integrate(system, 1.0, (0.0, 2.0))
    quadratic = QuadraticPropagator(system, trajectory, min(ctx.usable_sizes(MAX_WORD_LENGTH)))
    for t, s in ctx.rng.uniform(0.0, 2.0, size=(4, 2)):
        worst = max(worst, quadratic.unitarity_defect(t, s))
    return Measurement(worst, 1e-8)


@invariant("evolution.composition")
def _composition(ctx: SuiteContext) -> Measurement:
    H = parse(EXAMPLE_HAMILTONIAN)
    cutoff = max(ctx.usable_sizes(MAX_WORD_LENGTH))
    spectral = spectral_propagator(poly_matrix(H, cutoff, 0.1, exact_truncation=True), 0.1)
    worst = 0.0
    for t, s, sigma in ctx.rng.uniform(0.0, 5.0, size=(20, 3)):
        product = spectral.matrix(t, s) @ spectral.matrix(s, sigma)
        worst = max(worst, float(np.linalg.norm(product - spectral.matrix(t, sigma), 2)))
    system = build_system(H)
    trajectory = integrate(system, 1.0, (0.0, 2.0))
    quadratic = QuadraticPropagator(system, trajectory, min(ctx.usable_sizes(MAX_WORD_LENGTH)), step_safety=0.1)
    for t, s, sigma in ctx.rng.uniform(0.0, 2.0, size=(3, 3)):
        product = quadratic.matrix(t, s) @ quadratic.matrix(s, sigma)
        worst = max(worst, float(np.linalg.norm(product - quadratic.matrix(t, sigma), 2)))
    return Measurement(worst, 1e-7)


@invariant("evolution.spectral_inverse")
def _spectral_inverse(ctx: SuiteContext) -> Measurement:
    H = parse(EXAMPLE_HAMILTONIAN)
    cutoff = max(ctx.usable_sizes(MAX_WORD_LENGTH))
    spectral = spectral_propagator(poly_matrix(H, cutoff, 0.1, exact_truncation=True), 0.1)
    worst = 0.0
    for t in ctx.rng.uniform(0.0, 5.0, size=20):
        psi = ctx.rng.standard_normal(cutoff + 1) + 1j * ctx.rng.standard_normal(cutoff + 1)
        psi /= np.linalg.norm(psi)
        back = spectral.apply(0.0, t, spectral.apply(t, 0.0, psi))
        worst = max(worst, float(np.linalg.norm(back - psi)))
    return Measurement(worst, 1e-12)


def _quadratic_flow(cutoff: int):
    system = _example_system()
    trajectory = integrate(system, 1.0, (0.0, 0.5, 1.0, 2.0))
    return trajectory, QuadraticPropagator(system, trajectory, cutoff)


@invariant("evolution.bogoliubov_law")
def _bogoliubov_law(ctx: SuiteContext) -> Measurement:
    cutoff, block = QUADRATIC_CUTOFF, 21
    trajectory, quadratic = _quadratic_flow(cutoff)
    a, a_dag = ladder_matrices(cutoff)
    worst = 0.0
    evolved, previous = np.eye(cutoff + 1, dtype=complex), 0.0
    for t in (0.5, 1.0, 2.0):
        evolved = quadratic.matrix(t, previous) @ evolved
        previous = t
        sample = trajectory.at(t)
        lowered = evolved.conj().T @ a.matrix @ evolved
        raised = evolved.conj().T @ a_dag.matrix @ evolved
        expected_lowered = sample.gamma * a.matrix + sample.delta * a_dag.matrix
        expected_raised = sample.delta.conjugate() * a.matrix + sample.gamma.conjugate() * a_dag.matrix
        for measured, expected in ((lowered, expected_lowered), (raised, expected_raised)):
            worst = max(worst, float(np.linalg.norm((measured - expected)[:block, :block], 2)))
    return Measurement(worst, 1e-5)


@invariant("evolution.generator_consistency")
def _generator_consistency(ctx: SuiteContext) -> Measurement:
    cutoff = max(ctx.usable_sizes(MAX_WORD_LENGTH))
    _, quadratic = _quadratic_flow(cutoff)
    t, eps = 1.0, 1e-4
    psi = FockState.vacuum(cutoff).coeffs
    start = quadratic.apply(t - eps, 0.0, psi)
    derivative = (quadratic.apply(t + eps, t - eps, start) - start) / (2 * eps)
    expected = -1j * quadratic.generator(t) @ quadratic.apply(t, t - eps, start)
    return Measurement(float(np.linalg.norm(derivative - expected) / np.linalg.norm(expected)), 1e-4)


@invariant("evolution.heisenberg_derivative")
def _heisenberg_derivative(ctx: SuiteContext) -> Measurement:
    cutoff = max(ctx.usable_sizes(MAX_WORD_LENGTH))
    _, quadratic = _quadratic_flow(cutoff)
    t, eps = 1.0, 1e-4
    a, _ = ladder_matrices(cutoff)
    chi = quadratic.apply(t, 0.0, FockState.vacuum(cutoff).coeffs)
    forward = quadratic.matrix(t + eps, t)
    backward = quadratic.matrix(t - eps, t)
    derivative = (
        forward.conj().T @ (a.matrix @ (forward @ chi)) - backward.conj().T @ (a.matrix @ (backward @ chi))
    ) / (2 * eps)
    generator = quadratic.generator(t)
    expected = 1j * (generator @ (a.matrix @ chi) - a.matrix @ (generator @ chi))
    return Measurement(float(np.linalg.norm(derivative - expected) / np.linalg.norm(expected)), 1e-4)


@invariant("evolution.harmonic_exactness")
def _harmonic_exactness(ctx: SuiteContext) -> Measurement:
    H = parse("a* a")
    system = build_system(H)
    times = (1.0, math.pi)
    trajectory = integrate(system, 1.0, (0.0, *times))
    states = (
        FockState.basis(0, 2),
        FockState.basis(1, 2),
        FockState.from_coefficients([1.0, 0.0, 1.0], 2),
    )
    worst = 0.0
    for hbar in (0.1, 0.025):
        cutoff = CutoffPolicy().resolve(trajectory.alpha_max(), hbar, H.degree)
        family = hepp_family(H, 1.0, hbar, cutoff, trajectory)
        for psi in states:
            vector = as_vector(psi, cutoff)
            for t in times:
                expected = np.exp(-1j * np.arange(cutoff + 1) * t) * vector
                worst = max(worst, float(np.linalg.norm(family.apply(t, psi) - expected)))
    return Measurement(worst, 1e-6)


# ---------------------------------------------------------------------------
# Correlators


@invariant("correlators.fluctuation_ccr")
def _fluctuation_ccr(ctx: SuiteContext) -> Measurement:
    trajectory = integrate(_example_system(), 1.0, (0.0, 0.5, 1.0, 2.0))
    commutator = MultiPoly.parse("a1 a1* - a1* a1")
    psi = FockState.from_coefficients([1.0, 1.0], 1)
    worst = 0.0
    for t in (0.0, 0.5, 1.0, 2.0):
        value = fluctuation_expectation(commutator, trajectory, (t,), psi, 1.0, FluctuationMode.CENTERED_SCALED).value
        worst = max(worst, abs(value - 1.0))
    return Measurement(worst, 1e-8)


@invariant("correlators.static_exactness")
def _static_exactness(ctx: SuiteContext) -> Measurement:
    hbar, alpha, cutoff = 0.25, 1.0 + 0j, 80
    psi = FockState.from_coefficients([1.0, 0.5j], 1)
    worst = 0.0
    for _ in range(5):
        P = random_symmetric_poly(ctx.rng, max_degree=3)
        small = fluctuation_cutoff(P, psi)
        vector = as_vector(psi, small)
        for rescale, scale in ((True, 1.0), (False, hbar)):
            reference = np.vdot(vector, poly_matrix(P, small, scale, exact_truncation=True).matrix @ vector)
            measured = static_expectation(P, hbar, cutoff, alpha, psi, center=True, rescale=rescale).value
            worst = max(worst, abs(measured - reference))
    return Measurement(worst, 1e-8)


# ---------------------------------------------------------------------------
# Runner


def _evaluate(name: str, fn: InvariantFn, ctx: SuiteContext) -> InvariantResult:
    try:
        measurement = fn(ctx)
    except SkipInvariant as exc:
        logger.info("Invariant %s skipped: %s", name, exc)
        return InvariantResult(name, 0.0, 0.0, Verdict.SKIPPED, str(exc))
    except Exception as exc:  # failures are data
        logger.exception("Invariant %s raised", name)
        return InvariantResult(name, math.inf, 0.0, Verdict.FAIL, f"{type(exc).__name__}: {exc}")
    verdict = Verdict.PASS if measurement.residual <= measurement.bound else Verdict.FAIL
    if verdict is Verdict.FAIL:
        logger.warning("Invariant %s failed: residual %.3e above %.3e", name, measurement.residual, measurement.bound)
    else:
        logger.debug("Invariant %s passed: residual %.3e", name, measurement.residual)
    return InvariantResult(name, float(measurement.residual), float(measurement.bound), verdict)


def run_invariant_suite(
    seed: int = DEFAULT_SEED,
    sizes: Sequence[int] = INVARIANT_SIZES,
    fault_injection: bool = False,
    names: Optional[Iterable[str]] = None,
) -> InvariantLedger:
    """Run every registered invariant (or only ``names``) and collect the ledger."""

    sizes = tuple(sorted(int(m) for m in sizes))
    selected = list(_REGISTRY) if names is None else list(names)
    unknown = [name for name in selected if name not in _REGISTRY]
    if unknown:
        raise KeyError(f"Unknown invariants: {', '.join(unknown)}")
    order = {name: index for index, name in enumerate(_REGISTRY)}
    results = []
    for name in selected:
        # one stream per registered invariant, whatever the selection
        ctx = SuiteContext(seed, sizes, fault_injection, np.random.default_rng([seed, order[name]]))
        results.append(_evaluate(name, _REGISTRY[name], ctx))
    ledger = InvariantLedger(tuple(results), seed, sizes)
    logger.info(
        "Invariant suite: %d passed, %d failed, %d skipped",
        sum(r.verdict is Verdict.PASS for r in results),
        len(ledger.failures),
        sum(r.verdict is Verdict.SKIPPED for r in results),
    )
    return ledger


__all__ = [
    "InvariantLedger",
    "InvariantResult",
    "Measurement",
    "SkipInvariant",
    "SuiteContext",
    "Verdict",
    "all_words",
    "invariant",
    "random_poly",
    "random_symmetric_poly",
    "registered_invariants",
    "run_invariant_suite",
]

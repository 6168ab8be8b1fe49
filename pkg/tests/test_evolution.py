import logging
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import numpy as np
import pytest
from scipy import linalg

from core.classical import build_system, integrate
from core.evolution import (
    InfeasibleDisplacementError,
    MagnusPropagator,
    NonHermitianGeneratorError,
    PropagatorKind,
    StepSizeUnderflowError,
    check_displacement,
    generator_residual,
    hepp_family,
    hepp_ladder,
    l_hbar_generator,
    norm_growth_bound,
    number_moment,
    quadratic_evolution,
    required_cutoff,
    spectral_propagator,
    truncated_evolution,
    unitarity_defect,
    weyl,
)
from core.fock import FockOperator, FockState, coherent_column, number_operator, poly_matrix
from core.grammar import parse
from core.spectral_cache import get_cache

HARMONIC = parse("a* a")
EXAMPLE = parse("a* a + (0.5) (a* a)(a* a)")


@pytest.fixture(autouse=True)
def fresh_cache():
    get_cache().reset()
    yield
    get_cache().reset()


@pytest.fixture(scope="module")
def harmonic_trajectory():
    return integrate(build_system(HARMONIC), 0.5, (0.0, 0.5, 1.0, 1.5))


def _rotation(cutoff: int, t: float) -> np.ndarray:
    return np.diag(np.exp(-1j * np.arange(cutoff + 1) * t))


# ---------------------------------------------------------------------------
# Propagators


def test_spectral_propagator_of_number_operator():
    cutoff, hbar = 12, 0.2
    propagator = spectral_propagator(number_operator(cutoff, hbar), hbar)
    assert propagator.kind is PropagatorKind.TIME_INDEPENDENT
    assert np.allclose(propagator.matrix(0.7), _rotation(cutoff, 0.7))
    assert np.allclose(propagator.matrix(0.7, 0.2), _rotation(cutoff, 0.5))
    psi = FockState.basis(3, cutoff)
    assert np.allclose(propagator.apply(0.7, 0.0, psi), _rotation(cutoff, 0.7) @ psi.coeffs)
    assert propagator.unitarity_defect(3.0) < 1e-12


def test_spectral_propagator_rejects_non_hermitian_input():
    with pytest.raises(NonHermitianGeneratorError) as info:
        spectral_propagator(FockOperator(np.array([[0.0, 1.0], [0.0, 0.0]])))
    assert info.value.asymmetry == pytest.approx(1.0)


def test_magnus_is_exact_for_a_constant_generator():
    rng = np.random.default_rng(7)
    raw = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    generator = 0.5 * (raw + raw.conj().T)
    propagator = MagnusPropagator(lambda _t: generator, cutoff=5)
    assert propagator.kind is PropagatorKind.TIME_DEPENDENT
    assert np.allclose(propagator.matrix(1.3), linalg.expm(-1.3j * generator), atol=1e-10)
    assert np.allclose(propagator.matrix(0.0, 1.3), propagator.matrix(1.3).conj().T, atol=1e-10)
    assert np.allclose(propagator.apply(0.4, 0.4, np.ones(6)), np.ones(6))


def test_magnus_step_limit():
    propagator = MagnusPropagator(lambda _t: 10.0 * np.eye(3), cutoff=2, max_steps=1)
    with pytest.raises(StepSizeUnderflowError) as info:
        propagator.matrix(1.0)
    assert info.value.steps > info.value.limit


def test_truncated_evolution_of_the_harmonic_oscillator():
    cutoff, hbar = 10, 0.25
    propagator = truncated_evolution(lambda _t: HARMONIC, hbar, cutoff)
    assert np.allclose(propagator.matrix(1.0), _rotation(cutoff, 1.0), atol=1e-10)
    with pytest.raises(NonHermitianGeneratorError):
        truncated_evolution(lambda _t: parse("a"), hbar, cutoff).matrix(1.0)


def test_quadratic_propagator_for_the_harmonic_oscillator(harmonic_trajectory):
    propagator = quadratic_evolution(harmonic_trajectory.system, harmonic_trajectory, 10)
    assert np.allclose(propagator.matrix(1.0), _rotation(10, 1.0), atol=1e-9)
    assert unitarity_defect(propagator.matrix(1.5)) < 1e-10


def test_quadratic_generator_is_the_exactly_truncated_quadratic_part():
    system = build_system(EXAMPLE)
    trajectory = integrate(system, 0.5, (0.0, 1.0))
    propagator = quadratic_evolution(system, trajectory, 12)
    for t in (0.0, 0.4, 1.0):
        part = system.quadratic_part(trajectory.at(t).alpha)
        expected = poly_matrix(part, 12, 1.0, exact_truncation=True).matrix
        generator = propagator.generator(t)
        assert np.allclose(generator, expected, atol=1e-12)
        assert np.allclose(generator, generator.conj().T, atol=1e-12)


# ---------------------------------------------------------------------------
# Weyl operators


def test_displacement_feasibility(caplog):
    assert required_cutoff(1.0, 0.1) == 40
    assert check_displacement(1.0, 0.1, 40)
    with caplog.at_level(logging.WARNING, logger="core.evolution"):
        assert not check_displacement(1.0, 0.1, 39)
    assert "needs M >= 40" in caplog.text
    with pytest.raises(InfeasibleDisplacementError) as info:
        check_displacement(1.0, 0.1, 39, strict=True)
    assert info.value.required_cutoff == 40


def test_weyl_operator_is_unitary_and_displaces_the_vacuum():
    U = weyl(0.5, 0.25, 60)
    assert unitarity_defect(U.matrix) < 1e-10
    assert np.allclose(U.matrix[:, 0], coherent_column(0.5, 0.25, 60), atol=1e-8)
    assert np.allclose(weyl(0.0, 0.25, 5).matrix, np.eye(6))
    with pytest.raises(ValueError):
        weyl(0.5, 0.0, 10)


def test_cached_weyl_reuses_the_matrix():
    cache = get_cache()
    first = weyl(0.5, 0.25, 30, cache=True)
    second = weyl(0.5, 0.25, 30, cache=True)
    assert cache.misses == 1 and cache.hits == 1
    assert first.matrix is second.matrix


# ---------------------------------------------------------------------------
# Hepp family


def test_l_hbar_generator_scales_higher_degrees():
    generator = l_hbar_generator(EXAMPLE, 0.0, 0.1)
    assert generator.almost_equal(parse("a* a + (0.05) (a* a)(a* a)"), 1e-12)
    with pytest.raises(ValueError):
        l_hbar_generator(EXAMPLE, 0.0, 0.0)


def test_harmonic_hepp_family_matches_quadratic_evolution(harmonic_trajectory):
    family = hepp_family(HARMONIC, 0.5, 0.1, 60, harmonic_trajectory, quadratic_cutoff=40)
    vacuum = FockState.vacuum(10)
    for t in (0.5, 1.0, 1.5):
        assert family.w_distance(t, vacuum) < 1e-7
    psi = FockState.basis(1, 60)
    assert np.allclose(family.apply_adjoint(1.0, family.apply(1.0, psi)), psi.coeffs, atol=1e-10)
    assert np.allclose(family.matrix(1.0) @ psi.coeffs, family.apply(1.0, psi), atol=1e-10)
    assert family.tail_mass(1.0, vacuum, 10) < 1e-12


def test_apply_between_is_the_two_time_sandwich(harmonic_trajectory):
    family = hepp_family(HARMONIC, 0.5, 0.1, 60, harmonic_trajectory, quadratic_cutoff=40)
    psi = FockState.basis(1, 60)
    sandwich = family.apply(1.5, family.apply_adjoint(0.5, psi))
    between = family.apply_between(1.5, 0.5, psi)
    assert np.allclose(between, sandwich, atol=1e-12)
    assert np.allclose(between, np.exp(-1j) * psi.coeffs, atol=1e-7)
    assert np.allclose(family.apply_between(1.0, 1.0, psi), psi.coeffs, atol=1e-10)


def test_w0_is_shared_across_hbar(harmonic_trajectory):
    cache = get_cache()
    vacuum = FockState.vacuum(10)
    coarse = hepp_family(HARMONIC, 0.5, 0.1, 60, harmonic_trajectory, quadratic_cutoff=40)
    fine = hepp_family(HARMONIC, 0.5, 0.05, 60, harmonic_trajectory, quadratic_cutoff=40)
    first = coarse.w0_apply(1.0, vacuum)
    hits = cache.hits
    second = fine.w0_apply(1.0, vacuum)
    assert second is first
    assert not first.flags.writeable
    assert cache.hits == hits + 1
    assert np.allclose(first, np.eye(41)[0], atol=1e-9)


def test_hepp_family_checks_its_inputs(harmonic_trajectory):
    with pytest.raises(ValueError):
        hepp_family(EXAMPLE, 0.5, 0.1, 60, harmonic_trajectory)
    with pytest.raises(ValueError):
        hepp_family(HARMONIC, 0.4, 0.1, 60, harmonic_trajectory)
    with pytest.raises(InfeasibleDisplacementError):
        hepp_family(HARMONIC, 0.5, 0.1, 5, harmonic_trajectory)


def test_harmonic_diagnostics(harmonic_trajectory):
    family = hepp_family(HARMONIC, 0.5, 0.1, 60, harmonic_trajectory, quadratic_cutoff=20)
    psi = FockState.basis(1, 60)
    residual = generator_residual(family, 1.0, psi)
    assert residual.relative < 1e-5

    moment = number_moment(family, 1.0, psi, beta=1)
    assert moment.evolved == pytest.approx(1.0, abs=1e-8)
    assert moment.initial_weighted == pytest.approx(2.0)

    lowered, raised = hepp_ladder(family, 1.0)
    a = np.diag(np.sqrt(np.arange(1, 61, dtype=float)), k=1)
    interior = slice(0, 10)
    assert np.allclose(lowered.matrix[interior, interior], np.exp(-1j) * a[interior, interior], atol=1e-8)
    assert np.allclose(raised.matrix, lowered.matrix.conj().T)


def test_norm_growth_bound_for_a_constant_generator():
    bound = norm_growth_bound(lambda _t: HARMONIC, beta=1, cutoff=20, hbar=0.1, t=1.0)
    assert bound == pytest.approx(math.exp(4.0))
    assert norm_growth_bound(lambda _t: HARMONIC, beta=0, cutoff=20, hbar=0.1, t=1.0) == 1.0

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import numpy as np
import pytest

from core.alphabet import THETA, THETA_STAR
from core.classical import build_system, integrate
from core.correlators import (
    ComplexExpectationError,
    Expectation,
    FluctuationMode,
    MultiPoly,
    classical_value,
    compare_correlator,
    fluctuation_cutoff,
    fluctuation_expectation,
    heisenberg_expectation,
    static_expectation,
    variance,
)
from core.fock import FockState
from core.grammar import parse
from core.spectral_cache import get_cache

ALPHA0 = 0.5 + 0.25j


@pytest.fixture(autouse=True)
def fresh_cache():
    get_cache().reset()
    yield
    get_cache().reset()


@pytest.fixture(scope="module")
def harmonic_trajectory():
    return integrate(build_system(parse("a* a")), ALPHA0, (0.0, 0.5, 1.0))


def test_multipoly_structure():
    P = MultiPoly.parse("a1* a2 + (2) a1")
    assert P.slot_count == 2
    assert P.degree == 2
    assert P.min_degree() == (1, False)
    assert MultiPoly.constant(3.0).min_degree() == (0, True)
    lifted = MultiPoly.from_ncpoly(parse("a* a"), slot=2)
    assert lifted.terms == {((2, THETA_STAR), (2, THETA)): 1.0}
    with pytest.raises(ValueError):
        MultiPoly({((0, THETA),): 1.0})


def test_slot_count_must_fit_the_times(harmonic_trajectory):
    with pytest.raises(ValueError):
        classical_value(MultiPoly.parse("a2"), harmonic_trajectory, [1.0])


def test_heisenberg_mean_follows_the_classical_orbit(harmonic_trajectory):
    result = heisenberg_expectation(MultiPoly.parse("a1"), harmonic_trajectory, 0.1, 60, [1.0], FockState.vacuum(60))
    assert abs(result.value - np.exp(-1j) * ALPHA0) < 1e-8
    assert not result.truncated
    assert result.tail_mass < 1e-12


def test_two_time_correlator_of_a_coherent_state(harmonic_trajectory):
    P = MultiPoly.parse("a1* a2")
    times = [0.5, 1.0]
    expected = np.conj(np.exp(-0.5j) * ALPHA0) * np.exp(-1j) * ALPHA0
    result = compare_correlator(P, harmonic_trajectory, 0.1, 60, times, FockState.vacuum(60))
    assert abs(result.lhs - expected) < 1e-8
    assert abs(result.rhs - expected) < 1e-8
    assert abs(result.classical - expected) < 1e-8
    assert result.residual < 1e-8
    assert result.times == (0.5, 1.0)


def test_centered_rescaled_number_vanishes_for_the_harmonic_oscillator(harmonic_trajectory):
    P = MultiPoly.parse("a1* a1")
    result = compare_correlator(
        P, harmonic_trajectory, 0.1, 60, [1.0], FockState.vacuum(60), center=True, rescale=True
    )
    assert abs(result.lhs) < 1e-7
    assert abs(result.rhs) < 1e-12


def test_fluctuation_expectation_on_a_number_state(harmonic_trajectory):
    psi = FockState.basis(1, 4)
    P = MultiPoly.parse("a1* a1")
    assert fluctuation_cutoff(P, psi) == 4
    value = fluctuation_expectation(P, harmonic_trajectory, [1.0], psi, 1.0)
    assert value.value == pytest.approx(1.0, abs=1e-8)
    shifted = fluctuation_expectation(P, harmonic_trajectory, [1.0], psi, 0.1, FluctuationMode.SHIFTED)
    assert shifted.value == pytest.approx(abs(ALPHA0) ** 2 + 0.1, abs=1e-8)


def test_static_expectations_of_a_coherent_state():
    vacuum = FockState.vacuum(80)
    plain = static_expectation(parse("a* a"), 0.25, 80, 1.0, vacuum)
    assert plain.value == pytest.approx(1.0, abs=1e-10)
    centered = static_expectation(parse("a* a"), 0.25, 80, 1.0, vacuum, center=True, rescale=True)
    assert abs(centered.value) < 1e-10
    spread = static_expectation(parse("a a*"), 0.25, 80, 1.0, vacuum, center=True, rescale=True)
    assert spread.value == pytest.approx(1.0, abs=1e-10)


def test_variance_of_the_number_operator():
    result = variance(parse("a* a"), 0.25, 80, 1.0, FockState.vacuum(80))
    assert isinstance(result.value, float)
    assert result.value == pytest.approx(0.25, abs=1e-10)
    assert not result.truncated
    with pytest.raises(ValueError):
        variance(parse("a"), 0.25, 80, 1.0, FockState.vacuum(80))


def test_variance_of_the_vacuum_quadrature():
    quadrature = parse("(0.7071067811865476) (a + a*)")
    result = variance(quadrature, 0.1, 20, 0.0, FockState.vacuum(20))
    assert result.value == pytest.approx(0.05, abs=1e-12)
    assert variance(parse("(1)"), 0.1, 20, 0.5, FockState.vacuum(20)).value == pytest.approx(0.0, abs=1e-12)


def test_variance_rejects_complex_expectations(monkeypatch):
    monkeypatch.setattr(
        "core.correlators.static_expectation",
        lambda *args, **kwargs: Expectation(1.0 + 1e-3j, 0.0, False),
    )
    with pytest.raises(ComplexExpectationError) as info:
        variance(parse("a* a"), 0.25, 20, 1.0, FockState.vacuum(20))
    assert info.value.imag == pytest.approx(1e-3)


def test_small_cutoff_is_flagged_as_truncated(harmonic_trajectory):
    result = heisenberg_expectation(MultiPoly.parse("a1"), harmonic_trajectory, 0.1, 12, [1.0], FockState.vacuum(12))
    assert result.truncated
    assert result.tail_mass > 1e-8

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import numpy as np
import pytest

from core.alphabet import THETA, THETA_STAR
from core.fock import poly_matrix
from core.grammar import parse
from core.invariants import random_poly, random_symmetric_poly
from core.ncpoly import (
    CPoly,
    HbarPoly,
    NcPoly,
    l1_norms,
    min_degree,
    normal_order,
    normal_order_leading,
    reshift,
    shift_coefficients,
    shift_expand,
    symbol,
    symbol_derivative,
)

EXAMPLE = "a* a + (0.5) (a* a)(a* a)"


@pytest.fixture()
def rng():
    return np.random.default_rng(20240611)


def test_product_is_word_concatenation():
    P = NcPoly({(THETA,): 2.0})
    Q = NcPoly({(THETA_STAR,): 1j, (): 1.0})
    product = P * Q
    assert product.coefficient((THETA, THETA_STAR)) == 2j
    assert product.coefficient((THETA,)) == 2.0
    assert len(product) == 2


def test_zero_coefficients_are_dropped():
    P = NcPoly({(THETA,): 1.0}) - NcPoly({(THETA,): 1.0})
    assert P.is_zero
    assert P.degree == 0


def test_star_is_an_antilinear_antihomomorphism(rng):
    for _ in range(10):
        P, Q = random_poly(rng), random_poly(rng)
        assert (P * Q).star().almost_equal(Q.star() * P.star())
        assert P.star().star() == P
    assert NcPoly({(THETA,): 1j}).star() == NcPoly({(THETA_STAR,): -1j})


def test_symmetry_detection():
    assert parse(EXAMPLE).is_symmetric()
    pairs = parse("a").asymmetric_pairs()
    assert pairs and pairs[0][0] == (THETA,)
    assert parse("(1+1i) a + (1-1i) a*").is_symmetric()


def test_symbol_of_example_hamiltonian():
    cl = symbol(parse(EXAMPLE))
    assert cl.coefficient(1, 1) == pytest.approx(1.0)
    assert cl.coefficient(2, 2) == pytest.approx(0.5)
    assert cl.evaluate(1.0) == pytest.approx(1.5)
    derivative = symbol_derivative(cl, 0, 1)
    # ∂/∂z̄ (z z̄ + z² z̄² / 2) = z + z² z̄
    assert derivative.evaluate(2.0) == pytest.approx(2.0 + 8.0)


def test_symbol_is_multiplicative(rng):
    for _ in range(5):
        P, Q = random_poly(rng), random_poly(rng)
        assert symbol(P * Q).almost_equal(symbol(P) * symbol(Q))


def test_shift_expand_of_number_monomial():
    alpha = 0.3 - 0.4j
    parts = shift_expand(parse("a* a"), alpha)
    assert len(parts) == 3
    assert parts[0].coefficient(()) == pytest.approx(abs(alpha) ** 2)
    assert parts[1].coefficient((THETA,)) == pytest.approx(alpha.conjugate())
    assert parts[1].coefficient((THETA_STAR,)) == pytest.approx(alpha)
    assert parts[2] == parse("a* a")


def test_shift_coefficients_evaluate_to_shift_expand():
    P = parse(EXAMPLE)
    alpha = 0.7 + 0.2j
    for bucket, part in zip(shift_coefficients(P), shift_expand(P, alpha)):
        rebuilt = NcPoly({word: cpoly.evaluate(alpha) for word, cpoly in bucket})
        assert rebuilt.almost_equal(part)


def test_shift_then_unshift_recovers_the_polynomial(rng):
    for _ in range(10):
        P = random_poly(rng)
        alpha = complex(*rng.uniform(-1, 1, size=2))
        assert reshift(shift_expand(P, alpha), -alpha).almost_equal(P, 1e-12)


def test_shifted_parts_of_symmetric_polynomials_stay_symmetric(rng):
    for _ in range(10):
        P = random_symmetric_poly(rng)
        for part in shift_expand(P, 1.3 - 0.6j):
            assert part.is_symmetric(1e-12)


def test_normal_order_of_single_commutator():
    ordered = normal_order(parse("a a*"))
    assert ordered == HbarPoly({(0, (THETA_STAR, THETA)): 1.0, (2, ()): 1.0})
    assert ordered.specialize(0.5).almost_equal(parse("a* a + (0.5)"))
    assert ordered.powers == [0, 2]


def test_normal_order_leading_matches_the_hbar_free_part(rng):
    for _ in range(10):
        P = random_poly(rng)
        assert normal_order(P).hbar_part(0).almost_equal(normal_order_leading(P), 1e-12)


def test_normal_order_matches_matrices_on_interior_block(rng):
    cutoff = 24
    for _ in range(5):
        P = random_symmetric_poly(rng)
        rows = cutoff - P.degree + 1
        for hbar in (1.0, 0.3):
            direct = poly_matrix(P, cutoff, hbar).matrix[:rows, :rows]
            normal = poly_matrix(normal_order(P).specialize(hbar), cutoff, hbar).matrix[:rows, :rows]
            assert np.max(np.abs(direct - normal)) <= 1e-10


def test_min_degree_and_l1_norms():
    P = parse("a* a + (3) - (2) a^3")
    assert min_degree(P) == (2, False)
    assert min_degree(NcPoly.constant(4.0)) == (0, True)
    norms = l1_norms(P)
    assert norms.by_degree == pytest.approx((3.0, 0.0, 1.0, 2.0))
    assert norms.total == pytest.approx(6.0)


def test_homogeneous_parts_sum_back():
    P = parse(EXAMPLE + " + (2) a + (2) a*")
    total = NcPoly()
    for part in P.homogeneous_parts():
        total = total + part
    assert total == P
    assert P.homogeneous_part(1) == parse("(2) a + (2) a*")


def test_hbar_poly_rejects_negative_powers():
    with pytest.raises(ValueError):
        HbarPoly({(-1, ()): 1.0})
    with pytest.raises(ValueError):
        HbarPoly.from_ncpoly(parse("a")).specialize(-1.0)


def test_cpoly_real_valued_symbol():
    assert symbol(parse(EXAMPLE)).is_real_valued(1e-12)
    assert not CPoly.z().is_real_valued(1e-12)

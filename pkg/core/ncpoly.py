"""Noncommutative polynomial algebra over {θ, θ*} and its commutative symbols.

``NcPoly`` houses elements of ℂ⟨θ, θ*⟩, ``HbarPoly`` elements of ℂ[√ℏ]⟨θ, θ*⟩
and ``CPoly`` the commutative polynomials in (z, z̄) obtained as symbols.
All three are immutable once built.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np

from .alphabet import (
    EMPTY_WORD,
    THETA,
    THETA_STAR,
    Letter,
    Word,
    count_theta,
    count_theta_star,
    involution as word_involution,
    make_word,
    word_key,
)

Scalar = Union[int, float, complex]


# ---------------------------------------------------------------------------
# Noncommutative polynomials


class NcPoly:
    """Map from words to complex coefficients; zero coefficients are never stored."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Iterable[Letter | str], Scalar] | None = None) -> None:
        collected: Dict[Word, complex] = {}
        for raw_word, raw_coeff in (terms or {}).items():
            word = make_word(raw_word)
            collected[word] = collected.get(word, 0j) + complex(raw_coeff)
        self._terms: Dict[Word, complex] = {
            word: collected[word]
            for word in sorted(collected, key=word_key)
            if collected[word] != 0
        }
        self._hash: Optional[int] = None

    # ------------------------------------------------------------------
    @classmethod
    def constant(cls, value: Scalar) -> "NcPoly":
        return cls({EMPTY_WORD: value})

    @classmethod
    def monomial(cls, word: Iterable[Letter | str], coeff: Scalar = 1.0) -> "NcPoly":
        return cls({tuple(word): coeff})

    @classmethod
    def theta(cls) -> "NcPoly":
        return cls.monomial((THETA,))

    @classmethod
    def theta_star(cls) -> "NcPoly":
        return cls.monomial((THETA_STAR,))

    @classmethod
    def _from_canonical(cls, terms: Dict[Word, complex]) -> "NcPoly":
        poly = cls.__new__(cls)
        poly._terms = {
            word: terms[word] for word in sorted(terms, key=word_key) if terms[word] != 0
        }
        poly._hash = None
        return poly

    # ------------------------------------------------------------------
    @property
    def terms(self) -> Mapping[Word, complex]:
        return MappingProxyType(self._terms)

    def items(self) -> Iterator[Tuple[Word, complex]]:
        return iter(self._terms.items())

    def coefficient(self, word: Iterable[Letter | str]) -> complex:
        return self._terms.get(make_word(word), 0j)

    @property
    def degree(self) -> int:
        """Longest stored word; the zero polynomial has degree 0."""

        return max((len(word) for word in self._terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_constant(self) -> bool:
        return all(len(word) == 0 for word in self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    # ------------------------------------------------------------------
    def _coerce(self, other: object) -> Optional["NcPoly"]:
        if isinstance(other, NcPoly):
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return NcPoly.constant(complex(other))
        return None

    def __add__(self, other: object) -> "NcPoly":
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        merged = dict(self._terms)
        for word, coeff in rhs._terms.items():
            merged[word] = merged.get(word, 0j) + coeff
        return NcPoly._from_canonical(merged)

    __radd__ = __add__

    def __neg__(self) -> "NcPoly":
        return NcPoly._from_canonical({word: -coeff for word, coeff in self._terms.items()})

    def __sub__(self, other: object) -> "NcPoly":
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        return self + (-rhs)

    def __rsub__(self, other: object) -> "NcPoly":
        lhs = self._coerce(other)
        if lhs is None:
            return NotImplemented
        return lhs - self

    def __mul__(self, other: object) -> "NcPoly":
        if isinstance(other, NcPoly):
            return multiply(self, other)
        if isinstance(other, (int, float, complex, np.number)):
            factor = complex(other)
            return NcPoly._from_canonical(
                {word: coeff * factor for word, coeff in self._terms.items()}
            )
        return NotImplemented

    def __rmul__(self, other: object) -> "NcPoly":
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __truediv__(self, other: object) -> "NcPoly":
        if isinstance(other, (int, float, complex, np.number)):
            return self * (1.0 / complex(other))
        return NotImplemented

    def __pow__(self, exponent: int) -> "NcPoly":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("Exponent must be a non-negative integer")
        result = NcPoly.constant(1.0)
        for _ in range(exponent):
            result = multiply(result, self)
        return result

    def __eq__(self, other: object) -> bool:
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        return self._terms == rhs._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._terms.items()))
        return self._hash

    def __repr__(self) -> str:
        from .grammar import format_poly

        return f"NcPoly({format_poly(self)!r})"

    # ------------------------------------------------------------------
    def almost_equal(self, other: "NcPoly", tol: float = 1e-12) -> bool:
        """Coefficient-wise comparison with absolute tolerance ``tol``."""

        words = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(w) - other.coefficient(w)) <= tol for w in words)

    def star(self) -> "NcPoly":
        return involution(self)

    def asymmetric_pairs(self, tol: float = 0.0) -> List[Tuple[Word, complex, Word, complex]]:
        """Word pairs (w, w*) whose coefficients break P = P*."""

        offending: List[Tuple[Word, complex, Word, complex]] = []
        visited = set()
        for word, coeff in self._terms.items():
            partner = word_involution(word)
            if partner in visited:
                continue
            visited.add(word)
            partner_coeff = self._terms.get(partner, 0j)
            if abs(coeff - partner_coeff.conjugate()) > tol:
                offending.append((word, coeff, partner, partner_coeff))
        return offending

    def is_symmetric(self, tol: float = 0.0) -> bool:
        return not self.asymmetric_pairs(tol)

    def homogeneous_part(self, k: int) -> "NcPoly":
        return NcPoly._from_canonical(
            {word: coeff for word, coeff in self._terms.items() if len(word) == k}
        )

    def homogeneous_parts(self) -> List["NcPoly"]:
        return [self.homogeneous_part(k) for k in range(self.degree + 1)]

    def map_coefficients(self, fn) -> "NcPoly":
        return NcPoly._from_canonical({word: complex(fn(c)) for word, c in self._terms.items()})


def multiply(P: NcPoly, Q: NcPoly) -> NcPoly:
    """Noncommutative product: bilinear extension of word concatenation."""

    product: Dict[Word, complex] = {}
    for left, left_coeff in P.items():
        for right, right_coeff in Q.items():
            word = left + right
            product[word] = product.get(word, 0j) + left_coeff * right_coeff
    return NcPoly._from_canonical(product)


def involution(P: NcPoly) -> NcPoly:
    """Antilinear antihomomorphism: reverse words, swap letters, conjugate scalars."""

    return NcPoly._from_canonical(
        {word_involution(word): coeff.conjugate() for word, coeff in P.items()}
    )


# ---------------------------------------------------------------------------
# Commutative symbols


class CPoly:
    """Commutative polynomial in (z, z̄): map (deg_z, deg_zbar) → coefficient."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Tuple[int, int], Scalar] | None = None) -> None:
        collected: Dict[Tuple[int, int], complex] = {}
        for (i, j), coeff in (terms or {}).items():
            if i < 0 or j < 0:
                raise ValueError("Exponents must be non-negative")
            key = (int(i), int(j))
            collected[key] = collected.get(key, 0j) + complex(coeff)
        self._terms = {key: collected[key] for key in sorted(collected) if collected[key] != 0}

    @classmethod
    def constant(cls, value: Scalar) -> "CPoly":
        return cls({(0, 0): value})

    @classmethod
    def z(cls) -> "CPoly":
        return cls({(1, 0): 1.0})

    @classmethod
    def zbar(cls) -> "CPoly":
        return cls({(0, 1): 1.0})

    @property
    def terms(self) -> Mapping[Tuple[int, int], complex]:
        return MappingProxyType(self._terms)

    def coefficient(self, i: int, j: int) -> complex:
        return self._terms.get((i, j), 0j)

    @property
    def degree(self) -> int:
        return max((i + j for i, j in self._terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def __call__(self, z):
        return self.evaluate(z)

    def evaluate(self, z):
        """Value at ``z`` (scalar or numpy array)."""

        if np.ndim(z) == 0:
            zc = complex(z)
            zb = zc.conjugate()
            return sum((c * zc**i * zb**j for (i, j), c in self._terms.items()), 0j)
        values = np.asarray(z, dtype=complex)
        conj = np.conj(values)
        total = np.zeros_like(values)
        for (i, j), c in self._terms.items():
            total = total + c * values**i * conj**j
        return total

    def __add__(self, other: object) -> "CPoly":
        if isinstance(other, (int, float, complex)):
            other = CPoly.constant(other)
        if not isinstance(other, CPoly):
            return NotImplemented
        merged = dict(self._terms)
        for key, coeff in other._terms.items():
            merged[key] = merged.get(key, 0j) + coeff
        return CPoly(merged)

    __radd__ = __add__

    def __neg__(self) -> "CPoly":
        return CPoly({key: -c for key, c in self._terms.items()})

    def __sub__(self, other: object) -> "CPoly":
        if isinstance(other, (int, float, complex)):
            other = CPoly.constant(other)
        if not isinstance(other, CPoly):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other: object) -> "CPoly":
        if isinstance(other, (int, float, complex)):
            return CPoly({key: c * other for key, c in self._terms.items()})
        if not isinstance(other, CPoly):
            return NotImplemented
        product: Dict[Tuple[int, int], complex] = {}
        for (i1, j1), c1 in self._terms.items():
            for (i2, j2), c2 in other._terms.items():
                key = (i1 + i2, j1 + j2)
                product[key] = product.get(key, 0j) + c1 * c2
        return CPoly(product)

    def __rmul__(self, other: object) -> "CPoly":
        if isinstance(other, (int, float, complex)):
            return self * other
        return NotImplemented

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, float, complex)):
            other = CPoly.constant(other)
        if not isinstance(other, CPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(tuple(self._terms.items()))

    def __repr__(self) -> str:
        parts = [f"({c:g})z^{i}zbar^{j}" for (i, j), c in self._terms.items()]
        return "CPoly(" + (" + ".join(parts) or "0") + ")"

    def almost_equal(self, other: "CPoly", tol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(*k) - other.coefficient(*k)) <= tol for k in keys)

    def is_real_valued(self, tol: float = 0.0) -> bool:
        """c(i, j) = conj(c(j, i)) for every bidegree."""

        keys = set(self._terms) | {(j, i) for i, j in self._terms}
        return all(
            abs(self.coefficient(i, j) - self.coefficient(j, i).conjugate()) <= tol
            for i, j in keys
        )

    def derivative(self, dz: int = 0, dzbar: int = 0) -> "CPoly":
        return symbol_derivative(self, dz, dzbar)


def symbol(P: NcPoly) -> CPoly:
    """P^cl(z) = P(z, z̄): substitute commuting variables for θ and θ*."""

    terms: Dict[Tuple[int, int], complex] = {}
    for word, coeff in P.items():
        key = (count_theta(word), count_theta_star(word))
        terms[key] = terms.get(key, 0j) + coeff
    return CPoly(terms)


def symbol_derivative(f: CPoly, dz: int, dzbar: int) -> CPoly:
    """Formal Wirtinger derivative ∂^{dz}/∂z^{dz} ∂^{dzbar}/∂z̄^{dzbar}."""

    if dz < 0 or dzbar < 0:
        raise ValueError("Derivative orders must be non-negative")
    terms: Dict[Tuple[int, int], complex] = {}
    for (i, j), coeff in f.terms.items():
        if i < dz or j < dzbar:
            continue
        factor = math.perm(i, dz) * math.perm(j, dzbar)
        key = (i - dz, j - dzbar)
        terms[key] = terms.get(key, 0j) + coeff * factor
    return CPoly(terms)


# ---------------------------------------------------------------------------
# Shift expansion P(θ + α, θ* + ᾱ)


@lru_cache(maxsize=256)
def shift_coefficients(P: NcPoly) -> Tuple[Tuple[Tuple[Word, CPoly], ...], ...]:
    """Coefficient of every word of P(θ+α, θ*+ᾱ) as a polynomial in (α, ᾱ).

    Entry k lists the (word, CPoly) pairs of the homogeneous degree-k part.
    """

    buckets: List[Dict[Word, Dict[Tuple[int, int], complex]]] = [
        {} for _ in range(P.degree + 1)
    ]
    for word, coeff in P.items():
        for keep in itertools.product((False, True), repeat=len(word)):
            kept = tuple(letter for letter, flag in zip(word, keep) if flag)
            n_alpha = sum(1 for letter, flag in zip(word, keep) if not flag and letter is THETA)
            n_alpha_bar = sum(
                1 for letter, flag in zip(word, keep) if not flag and letter is THETA_STAR
            )
            bucket = buckets[len(kept)].setdefault(kept, {})
            key = (n_alpha, n_alpha_bar)
            bucket[key] = bucket.get(key, 0j) + coeff
    return tuple(
        tuple(
            (word, CPoly(poly_terms))
            for word, poly_terms in sorted(bucket.items(), key=lambda item: word_key(item[0]))
        )
        for bucket in buckets
    )


def shift_expand(P: NcPoly, alpha: complex) -> List[NcPoly]:
    """Homogeneous parts of P(θ+α, θ*+ᾱ), indexed by degree 0..deg(P)."""

    alpha = complex(alpha)
    parts: List[NcPoly] = []
    for bucket in shift_coefficients(P):
        parts.append(NcPoly._from_canonical({word: cpoly.evaluate(alpha) for word, cpoly in bucket}))
    return parts


def reshift(parts: Iterable[NcPoly], alpha: complex) -> NcPoly:
    """Sum the parts and shift the result by ``alpha``; inverse of shift_expand at −α."""

    total = NcPoly()
    for part in parts:
        total = total + part
    return sum(shift_expand(total, alpha), NcPoly())


# ---------------------------------------------------------------------------
# ℏ-graded polynomials and normal ordering


class HbarPoly:
    """Element of ℂ[√ℏ]⟨θ, θ*⟩: map (number of √ℏ factors, word) → coefficient."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Tuple[int, Iterable[Letter | str]], Scalar] | None = None) -> None:
        collected: Dict[Tuple[int, Word], complex] = {}
        for (power, raw_word), coeff in (terms or {}).items():
            if power < 0:
                raise ValueError("√ℏ powers must be non-negative")
            key = (int(power), make_word(raw_word))
            collected[key] = collected.get(key, 0j) + complex(coeff)
        self._terms = {
            key: collected[key]
            for key in sorted(collected, key=lambda k: (k[0], word_key(k[1])))
            if collected[key] != 0
        }

    @classmethod
    def from_ncpoly(cls, P: NcPoly) -> "HbarPoly":
        return cls({(0, word): coeff for word, coeff in P.items()})

    @property
    def terms(self) -> Mapping[Tuple[int, Word], complex]:
        return MappingProxyType(self._terms)

    @property
    def powers(self) -> List[int]:
        return sorted({power for power, _ in self._terms})

    def hbar_part(self, power: int) -> NcPoly:
        """Coefficient polynomial of (√ℏ)^power."""

        return NcPoly({word: c for (p, word), c in self._terms.items() if p == power})

    def specialize(self, hbar: float) -> NcPoly:
        """Set √ℏ to sqrt(hbar), collapsing to an NcPoly."""

        if hbar < 0:
            raise ValueError("hbar must be non-negative")
        root = math.sqrt(hbar)
        collected: Dict[Word, complex] = {}
        for (power, word), coeff in self._terms.items():
            collected[word] = collected.get(word, 0j) + coeff * root**power
        return NcPoly(collected)

    def __add__(self, other: object) -> "HbarPoly":
        if not isinstance(other, HbarPoly):
            return NotImplemented
        merged = dict(self._terms)
        for key, coeff in other._terms.items():
            merged[key] = merged.get(key, 0j) + coeff
        return HbarPoly(merged)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HbarPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(tuple(self._terms.items()))

    def __repr__(self) -> str:
        return f"HbarPoly({dict(self._terms)!r})"


@lru_cache(maxsize=4096)
def _normal_order_word(word: Word) -> Tuple[Tuple[Tuple[int, Word], int], ...]:
    """Rewrite θθ* → θ*θ + ℏ until the word is normal ordered."""

    for index in range(len(word) - 1):
        if word[index] is THETA and word[index + 1] is THETA_STAR:
            swapped = word[:index] + (THETA_STAR, THETA) + word[index + 2 :]
            contracted = word[:index] + word[index + 2 :]
            counts: Dict[Tuple[int, Word], int] = {}
            for key, count in _normal_order_word(swapped):
                counts[key] = counts.get(key, 0) + count
            for (power, rest), count in _normal_order_word(contracted):
                key = (power + 2, rest)
                counts[key] = counts.get(key, 0) + count
            return tuple(sorted(counts.items(), key=lambda item: (item[0][0], word_key(item[0][1]))))
    return (((0, word), 1),)


def normal_order(P: NcPoly) -> HbarPoly:
    """Normal-ordered form of P with ℏ-weighted commutator corrections."""

    terms: Dict[Tuple[int, Word], complex] = {}
    for word, coeff in P.items():
        for key, count in _normal_order_word(word):
            terms[key] = terms.get(key, 0j) + coeff * count
    return HbarPoly(terms)


def normal_order_leading(P: NcPoly) -> NcPoly:
    """ℏ⁰ part of normal_order via Taylor coefficients of the symbol at 0.

    Σ (1/(k! l!)) (∂^{k+l} P^cl / ∂z̄^k ∂z^l)(0) θ*^k θ^l.
    """

    cl = symbol(P)
    terms: Dict[Word, complex] = {}
    for l, k in cl.terms:
        value = symbol_derivative(cl, l, k).evaluate(0.0)
        word = (THETA_STAR,) * k + (THETA,) * l
        terms[word] = terms.get(word, 0j) + value / (math.factorial(k) * math.factorial(l))
    return NcPoly(terms)


# ---------------------------------------------------------------------------
# Degree bookkeeping and norms


class MinDegree(NamedTuple):
    value: int
    constant: bool


class L1Norms(NamedTuple):
    by_degree: Tuple[float, ...]
    total: float


def min_degree(P: NcPoly) -> MinDegree:
    """Length of the shortest nonconstant word (p_min); flagged when P is constant."""

    lengths = [len(word) for word in P.terms if len(word) > 0]
    if not lengths:
        return MinDegree(0, True)
    return MinDegree(min(lengths), False)


def l1_norms(P: NcPoly) -> L1Norms:
    """|P_k| = Σ|coefficients| of each homogeneous part, plus the total |P|."""

    by_degree = [0.0] * (P.degree + 1)
    for word, coeff in P.items():
        by_degree[len(word)] += abs(coeff)
    return L1Norms(tuple(by_degree), float(sum(by_degree)))


__all__ = [
    "CPoly",
    "HbarPoly",
    "L1Norms",
    "MinDegree",
    "NcPoly",
    "involution",
    "l1_norms",
    "min_degree",
    "multiply",
    "normal_order",
    "normal_order_leading",
    "reshift",
    "shift_coefficients",
    "shift_expand",
    "symbol",
    "symbol_derivative",
]

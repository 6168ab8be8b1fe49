"""Text grammar for polynomials in the ladder letters.

    poly   := term (('+' | '-') term)*          (a leading sign is allowed)
    term   := coeff? factor*
    factor := ('a*' | 'a') ('^' uint)? | '(' poly ')' ('^' uint)?
    coeff  := float | '(' float (('+' | '-') float 'i')? ')'

Whitespace is insignificant and juxtaposition is the noncommutative product.
``parse_multi_terms`` accepts the slot-indexed letters ``a1``, ``a1*``, ``a2`` …
used for multi-time observables.
"""
from __future__ import annotations

import logging
import re
from typing import Callable, Dict, FrozenSet, Hashable, List, Optional, Tuple

from .alphabet import THETA, THETA_STAR, Letter, Word
from .config import MAX_EXPONENT
from .ncpoly import NcPoly

logger = logging.getLogger(__name__)

Key = Tuple[Hashable, ...]
Terms = Dict[Key, complex]

_FLOAT_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_UINT_RE = re.compile(r"\d+")
_SLOT_RE = re.compile(r"\d+")


class PolynomialSyntaxError(ValueError):
    """Raised when the text does not follow the polynomial grammar."""

    def __init__(self, text: str, offset: int, expected: FrozenSet[str]) -> None:
        self.text = text
        self.offset = offset
        self.expected = expected
        found = repr(text[offset]) if offset < len(text) else "end of input"
        super().__init__(
            f"Syntax error at offset {offset}: found {found}, expected one of "
            f"{', '.join(sorted(expected))}"
        )


class ExponentOverflowError(ValueError):
    """Raised when an exponent exceeds the configured cap."""

    def __init__(self, offset: int, value: int, limit: int = MAX_EXPONENT) -> None:
        self.offset = offset
        self.value = value
        self.limit = limit
        super().__init__(f"Exponent {value} at offset {offset} exceeds the cap of {limit}")


# ---------------------------------------------------------------------------
# Term-map arithmetic shared by the single-mode and slot-indexed parsers


def _add(lhs: Terms, rhs: Terms, sign: float = 1.0) -> Terms:
    merged = dict(lhs)
    for key, coeff in rhs.items():
        merged[key] = merged.get(key, 0j) + sign * coeff
    return {key: value for key, value in merged.items() if value != 0}


def _mul(lhs: Terms, rhs: Terms) -> Terms:
    product: Terms = {}
    for left, left_coeff in lhs.items():
        for right, right_coeff in rhs.items():
            key = left + right
            product[key] = product.get(key, 0j) + left_coeff * right_coeff
    return {key: value for key, value in product.items() if value != 0}


def _pow(base: Terms, exponent: int) -> Terms:
    result: Terms = {(): 1.0 + 0j}
    for _ in range(exponent):
        result = _mul(result, base)
    return result


# ---------------------------------------------------------------------------


class _Parser:
    """Recursive-descent parser over a character cursor."""

    def __init__(self, text: str, read_letter: Callable[["_Parser"], Optional[Key]]) -> None:
        self.text = text
        self.pos = 0
        self._read_letter = read_letter

    # cursor helpers -------------------------------------------------
    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def fail(self, *expected: str) -> PolynomialSyntaxError:
        return PolynomialSyntaxError(self.text, self.pos, frozenset(expected))

    def match(self, pattern: re.Pattern) -> Optional[str]:
        self.skip_ws()
        found = pattern.match(self.text, self.pos)
        if found is None:
            return None
        self.pos = found.end()
        return found.group(0)

    # grammar --------------------------------------------------------
    def parse(self) -> Terms:
        result = self.poly()
        if self.peek():
            raise self.fail("'+'", "'-'", "'a'", "'a*'", "'('", "end of input")
        return result

    def sign(self) -> Optional[float]:
        char = self.peek()
        if char not in ("+", "-"):
            return None
        self.pos += 1
        return -1.0 if char == "-" else 1.0

    def poly(self) -> Terms:
        sign = self.sign() or 1.0
        result = _add({}, self.term(), sign)
        while True:
            sign = self.sign()
            if sign is None:
                return result
            result = _add(result, self.term(), sign)

    def term(self) -> Terms:
        coeff = self.coeff()
        product: Terms = {(): coeff if coeff is not None else 1.0 + 0j}
        factors = 0
        while True:
            factor = self.factor()
            if factor is None:
                break
            product = _mul(product, factor)
            factors += 1
        if coeff is None and factors == 0:
            raise self.fail("coefficient", "'a'", "'a*'", "'('")
        return product

    def coeff(self) -> Optional[complex]:
        char = self.peek()
        if not char:
            return None
        if char.isdigit() or char == ".":
            return complex(float(self.match(_FLOAT_RE)))
        if char != "(":
            return None
        saved = self.pos
        self.pos += 1
        real_sign = self.sign() or 1.0
        real_text = self.match(_FLOAT_RE)
        if real_text is None:
            self.pos = saved
            return None
        value = complex(real_sign * float(real_text))
        imag_sign = self.sign()
        if imag_sign is not None:
            imag_text = self.match(_FLOAT_RE)
            if imag_text is None or self.peek() != "i":
                self.pos = saved
                return None
            self.pos += 1
            value += 1j * imag_sign * float(imag_text)
        if self.peek() != ")":
            self.pos = saved
            return None
        self.pos += 1
        if self.peek() == "^":
            # "(x)^n" is a powered factor, not a coefficient
            self.pos = saved
            return None
        return value

    def factor(self) -> Optional[Terms]:
        char = self.peek()
        if char == "(":
            self.pos += 1
            inner = self.poly()
            if self.peek() != ")":
                raise self.fail("')'", "'+'", "'-'")
            self.pos += 1
            return _pow(inner, self.exponent())
        key = self._read_letter(self)
        if key is None:
            return None
        return {key * self.exponent(): 1.0 + 0j}

    def exponent(self) -> int:
        if self.peek() != "^":
            return 1
        self.pos += 1
        offset = self.pos
        digits = self.match(_UINT_RE)
        if digits is None:
            raise self.fail("unsigned integer")
        value = int(digits)
        if value > MAX_EXPONENT:
            raise ExponentOverflowError(offset, value)
        return value


def _read_mode_letter(parser: _Parser) -> Optional[Key]:
    if parser.peek() != "a":
        return None
    parser.pos += 1
    if parser.peek() == "*":
        parser.pos += 1
        return (THETA_STAR,)
    return (THETA,)


def _read_slot_letter(parser: _Parser) -> Optional[Key]:
    if parser.peek() != "a":
        return None
    parser.pos += 1
    slot_text = _SLOT_RE.match(parser.text, parser.pos)
    if slot_text is None or int(slot_text.group(0)) < 1:
        raise parser.fail("time-slot index")
    parser.pos = slot_text.end()
    slot = int(slot_text.group(0))
    if parser.peek() == "*":
        parser.pos += 1
        return ((slot, THETA_STAR),)
    return ((slot, THETA),)


# ---------------------------------------------------------------------------
# Public entry points


def parse(text: str) -> NcPoly:
    """Parse ``text`` into a canonical :class:`NcPoly`."""

    terms = _Parser(text, _read_mode_letter).parse()
    poly = NcPoly(terms)
    logger.debug("Parsed %r into %d terms", text, len(poly))
    return poly


def parse_multi_terms(text: str) -> Dict[Tuple[Tuple[int, Letter], ...], complex]:
    """Parse a slot-indexed observable such as ``a1 a2* - a2* a1``."""

    return _Parser(text, _read_slot_letter).parse()


def format_coefficient(value: complex) -> str:
    if value.imag == 0:
        return f"({value.real!r})"
    sign = "-" if value.imag < 0 else "+"
    return f"({value.real!r}{sign}{abs(value.imag)!r}i)"


def format_word(word: Word) -> str:
    """Space separated letters with runs compressed to ``^n``."""

    chunks: List[str] = []
    index = 0
    while index < len(word):
        letter = word[index]
        run = 1
        while index + run < len(word) and word[index + run] is letter:
            run += 1
        chunks.append(letter.value if run == 1 else f"{letter.value}^{run}")
        index += run
    return " ".join(chunks)


def format_poly(poly: NcPoly) -> str:
    """Canonical text for ``poly``; parsing the output yields ``poly`` again."""

    if poly.is_zero:
        return "0"
    pieces: List[str] = []
    for word, coeff in poly.items():
        if coeff.imag == 0:
            negative = coeff.real < 0
            magnitude = complex(abs(coeff.real))
        else:
            negative = False
            magnitude = coeff
        body = format_word(word)
        if magnitude != 1 or not word:
            body = f"{format_coefficient(magnitude)} {body}".strip()
        if not pieces:
            pieces.append(f"- {body}" if negative else body)
        else:
            pieces.append(f"{'-' if negative else '+'} {body}")
    return " ".join(pieces)


__all__ = [
    "ExponentOverflowError",
    "PolynomialSyntaxError",
    "format_coefficient",
    "format_poly",
    "format_word",
    "parse",
    "parse_multi_terms",
]

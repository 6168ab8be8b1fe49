"""Two-letter alphabet {θ, θ*} and word helpers for the polynomial algebra."""
from __future__ import annotations

from enum import Enum
from typing import Dict, Iterable, Tuple


class Letter(str, Enum):
    """Indeterminates of the algebra, spelled the way the grammar spells them."""

    THETA = "a"
    THETA_STAR = "a*"

    @property
    def star(self) -> "Letter":
        return Letter.THETA_STAR if self is Letter.THETA else Letter.THETA


THETA = Letter.THETA
THETA_STAR = Letter.THETA_STAR

ALL_LETTERS: Tuple[Letter, ...] = (THETA, THETA_STAR)

Word = Tuple[Letter, ...]

EMPTY_WORD: Word = ()

_LETTER_LOOKUP: Dict[str, Letter] = {
    "a": THETA,
    "theta": THETA,
    "θ": THETA,
    "a*": THETA_STAR,
    "a+": THETA_STAR,
    "theta*": THETA_STAR,
    "θ*": THETA_STAR,
}


def letter_from_id(identifier: str) -> Letter:
    """Return the letter associated with ``identifier``.

    Accepts the grammar spelling (``a`` / ``a*``) as well as a few common aliases.
    A :class:`KeyError` is raised if the identifier is unknown.
    """

    letter = _LETTER_LOOKUP.get(str(identifier).strip().lower())
    if letter is None:
        raise KeyError(f"Unknown letter: {identifier}")
    return letter


def normalise_letter(value: Letter | str) -> Letter:
    """Coerce ``value`` into a :class:`Letter` instance."""

    if isinstance(value, Letter):
        return value
    return letter_from_id(value)


def make_word(letters: Iterable[Letter | str]) -> Word:
    """Return a canonical word built from ``letters``."""

    return tuple(normalise_letter(entry) for entry in letters)


def involution(word: Word) -> Word:
    """Reverse ``word`` and swap every letter."""

    return tuple(letter.star for letter in reversed(word))


def count_theta(word: Word) -> int:
    """Number of θ letters, p(b)."""

    return sum(1 for letter in word if letter is THETA)


def count_theta_star(word: Word) -> int:
    """Number of θ* letters, q(b)."""

    return sum(1 for letter in word if letter is THETA_STAR)


def shift(word: Word) -> int:
    """ℓ(b) = #θ* − #θ: how far the monomial operator moves a Fock index."""

    return count_theta_star(word) - count_theta(word)


def max_excursion(word: Word) -> int:
    """Highest index offset reached while applying ``word`` right to left."""

    level = 0
    highest = 0
    for letter in reversed(word):
        level += 1 if letter is THETA_STAR else -1
        highest = max(highest, level)
    return highest


def word_key(word: Word) -> Tuple[int, ...]:
    """Sort key: lexicographic with THETA < THETA_STAR."""

    return tuple(0 if letter is THETA else 1 for letter in word)


def is_normal_ordered(word: Word) -> bool:
    """True when every θ* sits to the left of every θ."""

    seen_theta = False
    for letter in word:
        if letter is THETA:
            seen_theta = True
        elif seen_theta:
            return False
    return True


__all__ = [
    "ALL_LETTERS",
    "EMPTY_WORD",
    "Letter",
    "THETA",
    "THETA_STAR",
    "Word",
    "count_theta",
    "count_theta_star",
    "involution",
    "is_normal_ordered",
    "letter_from_id",
    "make_word",
    "max_excursion",
    "normalise_letter",
    "shift",
    "word_key",
]

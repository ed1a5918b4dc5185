"""Reduced words in the free group on three generators.

Crossing a lattice plane of the torus in the positive direction along axis
k emits generator k; crossing it backwards emits the inverse.  Orbit
homotopy classes are therefore reduced words over six letters, and the
Cayley graph of the free group (a 6-regular tree) carries the word metric
used everywhere else in this package.

Letters are stored as flat int8 code arrays because orbit words can reach
millions of letters.  Code of a letter: 2*(axis-1) for a generator,
2*(axis-1)+1 for its inverse, so inversion is just ``code ^ 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from ._jit import njit

LETTER_CHARS = "aAbBcC"  # index == letter code
EMPTY_WORD_TEXT = "-"


@dataclass(frozen=True)
class Letter:
    """One generator or inverse generator, tagged by axis 1..3 and sign."""

    axis: int
    sign: int

    def __post_init__(self):
        if self.axis not in (1, 2, 3) or self.sign not in (-1, 1):
            raise ValueError(f"bad letter ({self.axis}, {self.sign})")

    @property
    def code(self) -> int:
        return 2 * (self.axis - 1) + (0 if self.sign > 0 else 1)

    @classmethod
    def from_code(cls, code: int) -> "Letter":
        return cls(axis=code // 2 + 1, sign=1 if code % 2 == 0 else -1)

    def inverse(self) -> "Letter":
        return Letter(self.axis, -self.sign)

    def __str__(self) -> str:
        return LETTER_CHARS[self.code]


@njit(cache=True)
def _reduce_codes(codes):
    # Stack scan; adjacent pair cancels iff codes differ only in the low bit.
    out = np.empty_like(codes)
    top = 0
    for i in range(codes.size):
        c = codes[i]
        if top > 0 and (out[top - 1] ^ 1) == c:
            top -= 1
        else:
            out[top] = c
            top += 1
    return out[:top].copy()


class ReducedWord:
    """A freely reduced word.  Immutable; the code array is never shared
    mutably.  Construction reduces its input unless told it is reduced."""

    __slots__ = ("codes",)

    def __init__(self, codes=None, _trusted=False):
        if codes is None:
            arr = np.empty(0, dtype=np.int8)
        else:
            arr = np.asarray(codes, dtype=np.int8)
        if arr.size and (arr.min() < 0 or arr.max() > 5):
            raise ValueError("letter codes must lie in 0..5")
        if not _trusted and arr.size:
            arr = _reduce_codes(arr)
        self.codes = arr
        self.codes.setflags(write=False)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_letters(cls, letters: Iterable[Letter]) -> "ReducedWord":
        return cls([l.code for l in letters])

    @classmethod
    def parse(cls, text: str) -> "ReducedWord":
        """Inverse of str(): 'abA' etc., '-' for the empty word."""
        text = text.strip()
        if text in ("", EMPTY_WORD_TEXT):
            return cls()
        try:
            codes = [LETTER_CHARS.index(ch) for ch in text]
        except ValueError:
            bad = [ch for ch in text if ch not in LETTER_CHARS]
            raise ValueError(f"invalid word characters {bad!r} in {text!r}")
        return cls(codes)

    # -- container protocol ------------------------------------------------

    def __len__(self) -> int:
        return int(self.codes.size)

    def __getitem__(self, i) -> Letter:
        if isinstance(i, slice):
            return ReducedWord(self.codes[i], _trusted=True)
        return Letter.from_code(int(self.codes[i]))

    def __iter__(self) -> Iterator[Letter]:
        for c in self.codes:
            yield Letter.from_code(int(c))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReducedWord):
            return NotImplemented
        return self.codes.size == other.codes.size and bool(
            np.array_equal(self.codes, other.codes)
        )

    def __hash__(self) -> int:
        return hash(self.codes.tobytes())

    def __mul__(self, other: "ReducedWord") -> "ReducedWord":
        return concat(self, other)

    def __invert__(self) -> "ReducedWord":
        return inverse(self)

    def __str__(self) -> str:
        if not len(self):
            return EMPTY_WORD_TEXT
        return "".join(LETTER_CHARS[c] for c in self.codes)

    def __repr__(self) -> str:
        return f"ReducedWord({str(self)!r})"


class EndPrefix(ReducedWord):
    """A reduced word read as the address of a cylinder set of tree ends:
    all infinite reduced words starting with these letters."""


def reduce(letters) -> ReducedWord:
    """Freely reduce a letter sequence (Letters, codes, or a word)."""
    if isinstance(letters, ReducedWord):
        return letters
    if isinstance(letters, (list, tuple)) and letters and isinstance(letters[0], Letter):
        return ReducedWord.from_letters(letters)
    return ReducedWord(letters)


def inverse(u: ReducedWord) -> ReducedWord:
    return ReducedWord(u.codes[::-1] ^ 1, _trusted=True)


def concat(u: ReducedWord, v: ReducedWord) -> ReducedWord:
    """Product u*v.  Only the junction can cancel when both are reduced."""
    i = len(u) - 1
    j = 0
    nv = len(v)
    while i >= 0 and j < nv and (u.codes[i] ^ 1) == v.codes[j]:
        i -= 1
        j += 1
    out = np.concatenate([u.codes[: i + 1], v.codes[j:]])
    return ReducedWord(out, _trusted=True)


def common_prefix(u: ReducedWord, v: ReducedWord) -> ReducedWord:
    m = min(len(u), len(v))
    if m == 0:
        return ReducedWord()
    eq = u.codes[:m] == v.codes[:m]
    k = m if eq.all() else int(np.argmin(eq))
    return ReducedWord(u.codes[:k], _trusted=True)


def cayley_distance(u: ReducedWord, v: ReducedWord) -> int:
    """Word-metric distance between the group elements u and v.

    Equals len(reduce(inverse(u) * v)); for reduced inputs only the
    common prefix cancels, giving |u| + |v| - 2*lcp.
    """
    k = len(common_prefix(u, v))
    return len(u) + len(v) - 2 * k


def count_reduced_words(n: int) -> int:
    """Number of reduced words of length exactly n: 1, then 6*5**(n-1).

    First letter has 6 choices, every later letter must avoid the inverse
    of its predecessor.  Exact integer; n can be large.
    """
    if n < 0:
        raise ValueError("length must be nonnegative")
    if n == 0:
        return 1
    return 6 * 5 ** (n - 1)


def random_word(n: int, rng=None) -> ReducedWord:
    """Uniformly random reduced word of length exactly n.

    The first letter is uniform over all six, each later one uniform over
    the five that do not cancel their predecessor.
    """
    if n < 0:
        raise ValueError("length must be nonnegative")
    if rng is None:
        rng = np.random.default_rng()
    codes = np.empty(n, dtype=np.int8)
    for i in range(n):
        if i == 0:
            codes[i] = rng.integers(6)
        else:
            pick = int(rng.integers(5))
            banned = int(codes[i - 1]) ^ 1
            codes[i] = pick if pick < banned else pick + 1
    return ReducedWord(codes, _trusted=True)


@dataclass(frozen=True)
class RotationVector:
    """Point of the compactification cone: a speed and a direction prefix.

    Speed 0 is the cone point; its direction carries no information and is
    required to be the empty prefix.
    """

    speed: float
    direction: EndPrefix

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be nonnegative")
        if self.speed == 0 and len(self.direction):
            raise ValueError("zero speed must carry an empty direction prefix")


def parse_word(text: str) -> ReducedWord:
    return ReducedWord.parse(text)


def format_word(w: ReducedWord) -> str:
    return str(w)

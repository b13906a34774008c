"""Finite and eventually periodic words, and compositions along them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

from .errors import LetterOutOfRange, SizeLimit
from .jet import Jet

WORD_CAP = 10**7


@dataclass(frozen=True, slots=True)
class Word:
    letters: tuple[int, ...] = ()

    def __init__(self, letters: Sequence[int] = ()):
        object.__setattr__(self, "letters", tuple(int(i) for i in letters))

    @staticmethod
    def parse(text: str) -> "Word":
        text = text.strip()
        if not text:
            return Word()
        return Word(int(t) for t in text.split(","))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return Word(self.letters[k])
        return self.letters[k]

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + tuple(other))

    def reverse(self) -> "Word":
        return Word(self.letters[::-1])

    def prefix(self, n: int) -> "Word":
        return Word(self.letters[:n])

    def sub(self, m: int, n: int) -> "Word":
        """1-based block i_m..i_n; runs backwards when m > n."""
        if m <= n:
            return Word(self.letters[m - 1:n])
        return Word(self.letters[n - 1:m][::-1])

    @property
    def first(self) -> int:
        return self.letters[0]

    def __str__(self) -> str:
        return ",".join(map(str, self.letters))

    def __repr__(self) -> str:
        return f"Word({self.letters})"


@dataclass(frozen=True)
class PeriodicWord:
    """Infinite word: ``preperiod`` followed by ``period`` repeated forever."""

    preperiod: Word
    period: Word

    def __post_init__(self):
        if len(self.period) == 0:
            raise ValueError("period must be nonempty")

    def prefix(self, n: int) -> Word:
        out = list(self.preperiod.letters[:n])
        p = self.period.letters
        i = 0
        while len(out) < n:
            out.append(p[i % len(p)])
            i += 1
        return Word(out)

    def __str__(self) -> str:
        return f"{self.preperiod}({self.period})^inf"


class Orientation(str, Enum):
    FORWARD = "forward"  # f_{i1} ∘ ... ∘ f_{in}
    REVERSED = "reversed"  # f_{in} ∘ ... ∘ f_{i1}


@dataclass(frozen=True)
class ComposedJet:
    word: Word
    orientation: Orientation
    jet: Jet

    @property
    def value(self):
        return self.jet.d[0]

    @property
    def derivative(self):
        return self.jet.d[1]


def check_letters(word: Word, arity: int) -> None:
    for a in word:
        if not 1 <= a <= arity:
            raise LetterOutOfRange(f"letter {a} outside 1..{arity}")


def application_order(word: Word, orientation: Orientation) -> tuple[int, ...]:
    """Letters in the order the maps are applied to x."""
    if orientation == Orientation.FORWARD:
        return word.letters[::-1]
    return word.letters


def compose_eval(ifs, word: Word, orientation: Orientation, x, order: int) -> ComposedJet:
    """Jet of the composed map along ``word`` at x (float, array or Interval)."""
    orientation = Orientation(orientation)
    check_letters(word, ifs.arity)
    j = Jet.variable(x, order)
    for a in application_order(word, orientation):
        j = ifs[a].compose_jet(j)
    return ComposedJet(word, orientation, j)


def compose_value(ifs, word: Word, orientation: Orientation, x):
    """Value only, using the compiled evaluators (fast path for floats and arrays)."""
    orientation = Orientation(orientation)
    check_letters(word, ifs.arity)
    vec = not isinstance(x, float)
    for a in application_order(word, orientation):
        x = ifs[a].vec(x) if vec else ifs[a](x)
    return x


def common_prefix(a: Word, b: Word) -> Word:
    n = 0
    for p, q in zip(a, b):
        if p != q:
            break
        n += 1
    return a.prefix(n)


def enumerate_words(N: int, n: int, cap: int = WORD_CAP) -> Iterator[Word]:
    if N < 1 or n < 0:
        raise ValueError("need N >= 1 and n >= 0")
    if N**n > cap:
        raise SizeLimit(f"{N}^{n} words exceed the cap {cap}")
    for letters in itertools.product(range(1, N + 1), repeat=n):
        yield Word(letters)


@dataclass(frozen=True)
class Projection:
    value: float
    error_bound: float


def natural_projection(ifs, word, depth: int) -> Projection:
    """f_{i_1..i_n}(0) with the tail bound c_max^n on the distance to the limit point."""
    if isinstance(word, PeriodicWord):
        w = word.prefix(depth)
    else:
        if len(word) < depth:
            raise ValueError("finite word shorter than the requested depth")
        w = word.prefix(depth)
    v = compose_value(ifs, w, Orientation.FORWARD, 0.0)
    return Projection(v, ifs.c_max.hi**depth)

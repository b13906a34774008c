"""Koenigs linearization, the generator functions H-hat, conjugacy tests and changes of variables.

Anything with ``__call__``, ``vec`` and ``jet(x, order)`` works as a map here, so
conjugated numeric systems can be fed back into the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np

from .dimension import _check_not_singleton
from .dual import orbit
from .errors import NoConvergence, NotMonotone
from .jet import Jet, invert_jet
from .maps import UNIT, AnalyticMap, enclose, fixed_point as _bisect_fixed_point
from .words import Word, enumerate_words

TAYLOR_ORDER = 16
KOENIGS_TOL = 1e-12
KOENIGS_GRID = 33
MAX_KOENIGS_DEPTH = 4096
SLOPE_FLOOR = 1e-17
MAX_SERIES_TERMS = 5000


def fixed_point(fmap, tol: float = 1e-14) -> float:
    """Bisection followed by two Newton polishing steps."""
    p = _bisect_fixed_point(fmap, tol)
    for _ in range(2):
        j = fmap.jet(p, 1)
        step = (j.d[0] - p) / (j.d[1] - 1.0)
        q = min(1.0, max(0.0, p - step))
        if abs(fmap(q) - q) <= abs(fmap(p) - p):
            p = q
    return p


# ---------------------------------------------------------------- Koenigs map


class KoenigsMap:
    """g(x) = lim (f^n(x) - p)/lambda^n, normalized so that g(p) = 0 and g'(p) = 1.

    Near p the orbit is advanced with the Taylor polynomial of f at p, which
    keeps u = x - p accurate long after f(x) - p would have cancelled.
    """

    def __init__(self, fmap, depth: int = 8, p: float | None = None):
        self.fmap = fmap
        self.p = fixed_point(fmap) if p is None else p
        coeffs = fmap.jet(self.p, TAYLOR_ORDER).taylor()
        self.lam = float(coeffs[1])
        if self.lam == 0.0:
            raise NoConvergence("f'(p) = 0, the Koenigs map is undefined")
        self._a = [float(c) for c in coeffs]
        tail = max(abs(self._a[-1]), abs(self._a[-2]), 1e-300)
        self.radius = min(0.05, (1e-18 * abs(self.lam) / tail) ** (1.0 / (TAYLOR_ORDER - 1)))
        self.depth, self.tail_estimate = self._adapt(depth)

    # u -> f(p+u) - p and its derivative, from the Taylor polynomial
    def _poly(self, u):
        s = np.zeros_like(u)
        for c in reversed(self._a[1:]):
            s = (s + c) * u
        return s

    def _poly_deriv(self, u):
        s = np.zeros_like(u)
        for k in range(TAYLOR_ORDER, 0, -1):
            s = s * u + k * self._a[k]
        return s

    def _run(self, xs: np.ndarray, steps: int, with_deriv: bool = False):
        x = np.array(xs, dtype=float)
        u = x - self.p
        scale = np.ones_like(u)  # lambda^-k, applied only while far from p
        s = u.copy()
        dlog = np.zeros_like(u)
        near = np.abs(u) <= self.radius
        for _ in range(steps):
            far = ~near
            if with_deriv:
                d = np.empty_like(u)
                if far.any():
                    d[far] = np.asarray(self.fmap.jet(x[far], 1).d[1], dtype=float) * np.ones(far.sum())
                d[near] = self._poly_deriv(u[near])
                dlog += np.log(d / self.lam)
            if far.any():
                x[far] = self.fmap.vec(x[far])
                u[far] = x[far] - self.p
                scale[far] /= self.lam
                s[far] = u[far] * scale[far]
            if near.any():
                un = u[near]
                nxt = self._poly(un)
                ratio = np.where(un != 0.0, nxt / np.where(un != 0.0, self.lam * un, 1.0), 1.0)
                s[near] *= ratio
                u[near] = nxt
            newly = (~near) & (np.abs(u) <= self.radius)
            # hand over with the current scaled value already in s
            near |= newly
        return (s, np.exp(dlog)) if with_deriv else s

    def _adapt(self, depth: int) -> tuple[int, float]:
        xs = np.linspace(0.0, 1.0, KOENIGS_GRID)
        n = max(1, depth)
        prev = self._run(xs, n)
        while n <= MAX_KOENIGS_DEPTH:
            cur = self._run(xs, 2 * n)
            diff = float(np.max(np.abs(cur - prev)))
            if diff < KOENIGS_TOL:
                return 2 * n, diff
            n, prev = 2 * n, cur
        raise NoConvergence(f"Koenigs truncations still differ by {diff:.3g} at depth {n}")

    def __call__(self, x: float) -> float:
        return float(self._run(np.array([x]), self.depth)[0])

    def vec(self, xs):
        return self._run(np.asarray(xs, dtype=float), self.depth)

    def derivative(self, xs):
        """g'(x) as the product of f'(f^k x)/lambda."""
        return self._run(np.asarray(xs, dtype=float), self.depth, with_deriv=True)[1]

    def jet(self, x, order: int) -> Jet:
        """Value, g' and g'' = g' * H-hat; higher orders are not available."""
        if order > 2:
            raise ValueError("the Koenigs map provides derivatives up to order 2")
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        val, d1 = self._run(arr, self.depth, with_deriv=True)
        out = [val, d1]
        if order == 2:
            out.append(d1 * H_hat(self.fmap, arr))
        if np.ndim(x) == 0:
            out = [float(v[0]) for v in out]
        return Jet(out[: order + 1])

    def compose_jet(self, inner: Jet) -> Jet:
        return self.jet(inner.d[0], inner.order).compose(inner)

    def residual(self, grid: int = 101) -> float:
        """sup over the grid of |g(f(x)) - lambda g(x)|."""
        xs = np.linspace(0.0, 1.0, grid)
        return float(np.max(np.abs(self.vec(self.fmap.vec(xs)) - self.lam * self.vec(xs))))


def koenigs(fmap, depth: int = 8) -> KoenigsMap:
    return KoenigsMap(fmap, depth)


# ---------------------------------------------------------------- generator functions


def H_hat(fmap, x, depth: int | None = None):
    """sum_k (f''/f')(f^k x) (f^k)'(x), run until the slope falls below 1e-17."""
    scalar = np.ndim(x) == 0
    y = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    slope = np.ones_like(y)
    total = np.zeros_like(y)
    limit = depth if depth is not None else MAX_SERIES_TERMS
    for _ in range(limit):
        j = fmap.jet(y, 2)
        d1 = np.asarray(j.d[1], dtype=float) * np.ones_like(y)
        total = total + np.asarray(j.d[2], dtype=float) / d1 * slope
        slope = slope * d1
        y = np.asarray(j.d[0], dtype=float) * np.ones_like(y)
        if depth is None and float(np.max(np.abs(slope))) < SLOPE_FLOOR:
            break
    return float(total[0]) if scalar else total


def H_periodic(ifs, word: Word, x):
    """H over the infinite word (word)^inf via the cocycle, one period at a time."""
    scalar = np.ndim(x) == 0
    y = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    slope = np.ones_like(y)
    total = np.zeros_like(y)
    for _ in range(MAX_SERIES_TERMS):
        o = orbit(ifs, word, y)
        total = total + slope * o.H
        slope = slope * o.slope
        y = o.value
        if float(np.max(np.abs(slope))) < SLOPE_FLOOR:
            break
    return float(total[0]) if scalar else total


# ---------------------------------------------------------------- conjugacy test


class ConjugacyKind(str, Enum):
    CONJUGATE = "CONJUGATE"
    SUB_CONJUGATE = "SUB_CONJUGATE"
    NOT_DETECTED = "NOT_DETECTED"


@dataclass(frozen=True)
class GeneratorDiscrepancy:
    i: int
    j: int
    sup: float
    argmax: float
    at_zero: float

    def to_dict(self) -> dict:
        return {"pair": [self.i, self.j], "sup": self.sup, "argmax_x": self.argmax,
                "at_zero": self.at_zero}


@dataclass(frozen=True)
class SimilarityParameters:
    fixed_point: float
    ratio: float  # f_i'(p_i)
    translation: float
    residual: float


@dataclass(frozen=True)
class ConjugacyVerdict:
    kind: ConjugacyKind
    tol: float
    max_discrepancy: float  # over generator pairs and the grid
    generators: tuple[GeneratorDiscrepancy, ...]
    witness: tuple[Word, Word] | None = None
    witness_discrepancy: float | None = None
    min_discrepancy: float | None = None  # smallest sup found by the word search
    min_pair: tuple[Word, Word] | None = None
    parameters: tuple[SimilarityParameters, ...] = field(default=())
    max_word_length: int = 0

    @property
    def text(self) -> str:
        if self.kind == ConjugacyKind.CONJUGATE:
            return f"conjugate to a self-similar system (numerical verdict at tol {self.tol:g})"
        if self.kind == ConjugacyKind.SUB_CONJUGATE:
            a, b = self.witness
            return (f"sub-conjugate: words ({a}) and ({b}) give matching periodic functions "
                    f"(numerical verdict at tol {self.tol:g})")
        return (f"no conjugacy detected up to word length {self.max_word_length}; "
                "this is not a proof of non-conjugacy")

    def to_dict(self) -> dict:
        out = {
            "verdict": self.kind.value,
            "tol": self.tol,
            "max_discrepancy": self.max_discrepancy,
            "generators": [g.to_dict() for g in self.generators],
            "max_word_length": self.max_word_length,
            "text": self.text,
        }
        if self.witness:
            out["witness"] = [str(self.witness[0]), str(self.witness[1])]
            out["witness_discrepancy"] = self.witness_discrepancy
        if self.min_pair:
            out["min_discrepancy"] = self.min_discrepancy
            out["min_pair"] = [str(self.min_pair[0]), str(self.min_pair[1])]
        if self.parameters:
            out["similarity"] = [
                {"fixed_point": s.fixed_point, "ratio": s.ratio, "translation": s.translation,
                 "residual": s.residual}
                for s in self.parameters
            ]
        return out


def _recover(ifs, xs: np.ndarray) -> tuple[SimilarityParameters, ...]:
    """Similarity ratios and translations in the coordinates of the normalized Koenigs map of f_1."""
    G = KoenigsMap(ifs[1])
    g0, g1 = G(0.0), G(1.0)
    span = g1 - g0

    def norm(v):
        return (v - g0) / span

    gx = norm(G.vec(xs))
    out = []
    for m in ifs.maps:
        p = fixed_point(m)
        lam = float(m.jet(p, 1).d[1])
        t = norm(G(p)) * (1.0 - lam)
        res = float(np.max(np.abs(norm(G.vec(m.vec(xs))) - (lam * gx + t))))
        out.append(SimilarityParameters(p, lam, t, res))
    return tuple(out)


def conjugacy_test(ifs, grid: int = 101, tol: float = 1e-9, max_word_len: int = 4) -> ConjugacyVerdict:
    _check_not_singleton(ifs)
    xs = np.linspace(0.0, 1.0, grid)
    hats = [H_hat(m, xs) for m in ifs.maps]
    i0 = int(np.argmin(np.abs(xs)))
    gens = []
    for i, j in combinations(range(ifs.arity), 2):
        d = np.abs(hats[i] - hats[j])
        k = int(np.argmax(d))
        gens.append(GeneratorDiscrepancy(i + 1, j + 1, float(d[k]), float(xs[k]), float(d[i0])))
    max_disc = max(g.sup for g in gens)
    if max_disc <= tol:
        params = _recover(ifs, xs)
        if all(s.residual <= tol for s in params):
            return ConjugacyVerdict(ConjugacyKind.CONJUGATE, tol, max_disc, tuple(gens),
                                    parameters=params, max_word_length=max_word_len)
    best, best_pair = math.inf, None
    for n in range(1, max_word_len + 1):
        words = list(enumerate_words(ifs.arity, n))
        table = np.stack([hats[w[0] - 1] if n == 1 else H_periodic(ifs, w, xs) for w in words])
        first = np.array([w[0] for w in words])
        for a in range(len(words) - 1):
            # a shared prefix u only rescales the difference by f_u', and by analyticity
            # the pair is equivalent to its rotation; so compare words with distinct first letters
            rest = np.nonzero(first[a + 1:] != first[a])[0] + a + 1
            if rest.size == 0:
                continue
            sups = np.max(np.abs(table[rest] - table[a]), axis=1)
            k = int(np.argmin(sups))
            if sups[k] < best:
                best, best_pair = float(sups[k]), (words[a], words[rest[k]])
        if best <= tol:
            return ConjugacyVerdict(ConjugacyKind.SUB_CONJUGATE, tol, max_disc, tuple(gens),
                                    witness=best_pair, witness_discrepancy=best,
                                    min_discrepancy=best, min_pair=best_pair, max_word_length=max_word_len)
    return ConjugacyVerdict(ConjugacyKind.NOT_DETECTED, tol, max_disc, tuple(gens),
                            min_discrepancy=best, min_pair=best_pair, max_word_length=max_word_len)


# ---------------------------------------------------------------- changes of variables


class ChangeOfVariables:
    """A strictly monotone g on [0,1], affinely rescaled so that g(0) = 0 and g(1) = 1."""

    BISECTION_STEPS = 64

    def __init__(self, g, normalize: bool = True):
        if isinstance(g, str):
            g = AnalyticMap.from_source(g)
        self.g = g
        self._check_monotone()
        a, b = float(g(0.0)), float(g(1.0))
        self.offset, self.span = (a, b - a) if normalize else (0.0, 1.0)
        self.increasing = self.span * (b - a) > 0

    def _check_monotone(self):
        if isinstance(self.g, AnalyticMap):
            d = enclose(self.g, UNIT, 1, tol=1e-6)
            if d.contains(0.0):
                raise NotMonotone(f"g' takes values in [{d.lo:.6g}, {d.hi:.6g}], which contains 0")
        else:
            d = np.asarray(self.g.jet(np.linspace(0.0, 1.0, 1025), 1).d[1], dtype=float)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise NotMonotone("g' changes sign on the grid")

    def jet(self, x, order: int) -> Jet:
        j = self.g.jet(x, order)
        return Jet([(j.d[0] - self.offset) / self.span] + [c / self.span for c in j.d[1:]])

    def vec(self, xs):
        return (np.asarray(self.g.vec(xs), dtype=float) - self.offset) / self.span

    def __call__(self, x: float) -> float:
        return (float(self.g(x)) - self.offset) / self.span

    def inverse(self, ys):
        """Vectorized bisection on [0,1] with one Newton polish."""
        ys = np.asarray(ys, dtype=float)
        lo = np.zeros_like(ys)
        hi = np.ones_like(ys)
        for _ in range(self.BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            below = self.vec(mid) < ys
            if not self.increasing:
                below = ~below
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        z = 0.5 * (lo + hi)
        j = self.jet(z, 1)
        z2 = z - (np.asarray(j.d[0]) - ys) / np.asarray(j.d[1])
        return np.where((z2 >= 0.0) & (z2 <= 1.0), z2, z)


class ConjugatedMap:
    """x -> g(f(g^{-1}(x))) with derivatives through series reversion of g."""

    def __init__(self, base, change: ChangeOfVariables):
        self.base = base
        self.change = change

    def __call__(self, x: float) -> float:
        return float(self.vec(np.array([x]))[0])

    def vec(self, xs):
        return self.change.vec(self.base.vec(self.change.inverse(xs)))

    def jet(self, x, order: int) -> Jet:
        scalar = np.ndim(x) == 0
        y = np.atleast_1d(np.asarray(x, dtype=float))
        z = self.change.inverse(y)
        h = invert_jet(self.change.jet(z, order), z)
        inner = self.base.compose_jet(h)
        out = self.change.jet(np.asarray(inner.d[0], dtype=float) * np.ones_like(y), order).compose(inner)
        if scalar:
            return Jet([float(np.asarray(c).reshape(-1)[0]) for c in out.d])
        return out

    def compose_jet(self, inner: Jet) -> Jet:
        return self.jet(inner.d[0], inner.order).compose(inner)


@dataclass(frozen=True, eq=False)
class ConjugatedSystem:
    maps: tuple[ConjugatedMap, ...]
    change: ChangeOfVariables
    name: str = ""

    @property
    def arity(self) -> int:
        return len(self.maps)

    def __len__(self):
        return len(self.maps)

    def __getitem__(self, letter: int) -> ConjugatedMap:
        return self.maps[letter - 1]


def conjugate_ifs(ifs, g, normalize: bool = True) -> ConjugatedSystem:
    """The system (g∘f_i∘g^{-1}); raises NotMonotone unless g is strictly monotone on [0,1]."""
    change = g if isinstance(g, ChangeOfVariables) else ChangeOfVariables(g, normalize)
    return ConjugatedSystem(tuple(ConjugatedMap(m, change) for m in ifs.maps), change,
                            getattr(ifs, "name", ""))

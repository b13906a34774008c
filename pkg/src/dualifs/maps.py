"""Analytic self-maps of [0,1], their validation, and IFS containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .enclosure import DEFAULT_MAX_DEPTH, DEFAULT_TOL, Enclosure, enclose_fn, enclose_strict
from .errors import DomainError, InvalidMap
from .expr import Expr, compile_expr, evaluate, parse_map, to_source
from .interval import Interval, IntervalArray
from .jet import Jet

DEFAULT_EPSILON = 0.05
# tolerance for the constants cached on an IFS
CONSTANT_TOL = 1e-12
UNIT = Interval(0.0, 1.0)
# outward rounding pushes an exact endpoint such as f(0) = 0 slightly outside [0,1]
ROUNDING_SLACK = 1e-12
# image checks must resolve endpoints such as f(0) = 0 well inside the slack
IMAGE_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class AnalyticMap:
    expr: Expr
    epsilon: float = DEFAULT_EPSILON

    @staticmethod
    def from_source(source: str, epsilon: float = DEFAULT_EPSILON) -> "AnalyticMap":
        return AnalyticMap(parse_map(source, epsilon), epsilon)

    @property
    def source(self) -> str:
        return to_source(self.expr)

    @property
    def extension(self) -> Interval:
        return Interval(-self.epsilon, 1.0 + self.epsilon)

    @cached_property
    def _f(self):
        return compile_expr(self.expr)

    @cached_property
    def _fv(self):
        return compile_expr(self.expr, vectorized=True)

    def __call__(self, x: float) -> float:
        return self._f(x)

    def vec(self, xs):
        """Evaluate on a numpy array."""
        return self._fv(xs)

    def jet(self, x, order: int) -> Jet:
        """Derivative jet at x; x may be a float, an Interval or a numpy array."""
        return evaluate(self.expr, Jet.variable(x, order))

    def compose_jet(self, inner: Jet) -> Jet:
        """Jet of self∘inner, by evaluating the tree on the inner jet."""
        return evaluate(self.expr, inner)

    def derivative(self, x: float, k: int = 1) -> float:
        return self.jet(x, k).d[k]

    def range_fn(self, k: int):
        def fn(X: Interval):
            j = self.jet(X, k + 1)
            return j.d[k], j.d[k + 1]

        return fn

    def log_deriv_fn(self, k: int):
        """Range function for the k-th derivative of log|f'| (k >= 1)."""

        def fn(X):
            j = self.jet(X, k + 2).derivative()
            d0 = j.d[0]
            if isinstance(X, IntervalArray):
                # pieces where f' may vanish get unbounded values, so the search splits them
                n = X.lo.size
                dlo = np.broadcast_to(d0.lo, (n,))
                dhi = np.broadcast_to(d0.hi, (n,))
                bad = (dlo <= 0) & (dhi >= 0)
                sign = np.where(dhi < 0, -1.0, 1.0)
                coeffs = []
                for i, c in enumerate(j.d):
                    clo = np.broadcast_to(c.lo, (n,))
                    chi = np.broadcast_to(c.hi, (n,))
                    lo_, hi_ = np.where(sign < 0, -chi, clo), np.where(sign < 0, -clo, chi)
                    fill = 1.0 if i == 0 else 0.0
                    coeffs.append(IntervalArray(np.where(bad, fill, lo_), np.where(bad, fill, hi_)))
                lj = Jet(coeffs).log()
                out = []
                for c in (lj.d[k], lj.d[k + 1]):
                    clo = np.broadcast_to(c.lo, (n,))
                    chi = np.broadcast_to(c.hi, (n,))
                    out.append(IntervalArray(np.where(bad, -np.inf, clo), np.where(bad, np.inf, chi)))
                return out[0], out[1]
            if d0.hi < 0:
                j = -j
            elif not d0.lo > 0:
                _raise_zero()
            lj = j.log()
            return lj.d[k], lj.d[k + 1]

        return fn

    @cached_property
    def deriv_enclosure(self) -> Enclosure:
        """f' over [0,1]."""
        return enclose_fn(self.range_fn(1), UNIT, CONSTANT_TOL)

    @cached_property
    def ratio_enclosure(self) -> Enclosure:
        """f''/f' over [0,1]."""
        return enclose_fn(self.log_deriv_fn(1), UNIT, CONSTANT_TOL)

    @property
    def deriv_lower(self) -> Interval:
        return self.deriv_enclosure.abs_inf()

    @property
    def deriv_upper(self) -> Interval:
        return self.deriv_enclosure.abs_sup()

    @property
    def second_over_first_upper(self) -> Interval:
        return self.ratio_enclosure.abs_sup()

    def __repr__(self):
        return f"AnalyticMap({self.source!r}, epsilon={self.epsilon})"


def _raise_zero():
    raise DomainError("derivative enclosure touches zero")


def eval_jet(fmap: AnalyticMap, x: float, order: int) -> Jet:
    if order < 0:
        raise ValueError("order must be nonnegative")
    ext = fmap.extension
    if not (ext.lo <= x <= ext.hi):
        raise DomainError(f"x={x} outside [{ext.lo}, {ext.hi}]")
    return fmap.jet(float(x), order)


def enclose(fmap: AnalyticMap, domain: Interval, k: int = 0, tol: float = DEFAULT_TOL,
            max_depth: int = DEFAULT_MAX_DEPTH) -> Interval:
    """Enclosure of the range of f^(k) over ``domain``.

    Raises ToleranceNotReached carrying the widest enclosure if bisection
    stops before the overestimate drops below ``tol``.
    """
    _check_domain(fmap, domain)
    return enclose_strict(fmap.range_fn(k), domain, tol, max_depth).range


def enclose_ratio(fmap: AnalyticMap, domain: Interval = UNIT, tol: float = DEFAULT_TOL,
                  max_depth: int = DEFAULT_MAX_DEPTH) -> Interval:
    """Enclosure of f''/f' over ``domain``."""
    _check_domain(fmap, domain)
    return enclose_strict(fmap.log_deriv_fn(1), domain, tol, max_depth).range


def _check_domain(fmap: AnalyticMap, domain: Interval):
    if not fmap.extension.contains(domain):
        raise DomainError("domain leaves the validated extension")


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # "pass", "fail" or "assumed"
    enclosure: Interval | None
    detail: str

    @property
    def ok(self) -> bool:
        return self.status != "fail"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "enclosure": None if self.enclosure is None else [self.enclosure.lo, self.enclosure.hi],
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ValidationReport:
    source: str
    epsilon: float
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self) -> dict:
        return {
            "map": self.source,
            "epsilon": self.epsilon,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def validate_map(fmap: AnalyticMap) -> ValidationReport:
    eps = fmap.epsilon
    ext = fmap.extension
    checks = [
        Check(
            "analytic",
            "assumed",
            None,
            "complex analyticity is not checked; denominators are bounded away from zero on the real extension",
        )
    ]

    def rng(k, dom):
        try:
            return enclose_fn(fmap.range_fn(k), dom, IMAGE_TOL).range
        except DomainError:
            return None

    img = rng(0, UNIT)
    ok = img is not None and UNIT.widen(ROUNDING_SLACK).contains(img)
    checks.append(Check("maps_unit_into_itself", "pass" if ok else "fail", img, "f([0,1]) within [0,1]"))

    img_ext = rng(0, ext)
    ok = img_ext is not None and ext.interior_contains(img_ext)
    checks.append(Check("maps_extension_into_itself", "pass" if ok else "fail", img_ext,
                        f"f([-{eps}, 1+{eps}]) within the open extension"))

    d = rng(1, ext)
    ok = d is not None and (Interval(0.0, 1.0).interior_contains(d) or Interval(-1.0, 0.0).interior_contains(d))
    checks.append(Check("contracting", "pass" if ok else "fail", d, "0 < |f'| < 1 on the extension"))
    return ValidationReport(fmap.source, eps, tuple(checks))


@dataclass(frozen=True, eq=False)
class IFS:
    maps: tuple[AnalyticMap, ...]
    weights: tuple[float, ...] | None = None
    name: str = ""
    description: str = ""
    reports: tuple[ValidationReport, ...] = field(default=(), repr=False)

    @staticmethod
    def from_sources(sources: Sequence[str], epsilon: float = DEFAULT_EPSILON, validate: bool = True,
                     **kw) -> "IFS":
        maps = tuple(AnalyticMap.from_source(s, epsilon) for s in sources)
        return IFS.from_maps(maps, validate=validate, **kw)

    @staticmethod
    def from_maps(maps: Sequence[AnalyticMap], validate: bool = True, **kw) -> "IFS":
        maps = tuple(maps)
        if not maps:
            raise InvalidMap("an IFS needs at least one map")
        reports = ()
        if validate:
            reports = tuple(validate_map(m) for m in maps)
            bad = [r for r in reports if not r.passed]
            if bad:
                failed = ", ".join(f"{r.source}: {[c.name for c in r.checks if not c.ok]}" for r in bad)
                raise InvalidMap(f"maps failed validation: {failed}")
        return IFS(maps, reports=reports, **kw)

    @property
    def arity(self) -> int:
        return len(self.maps)

    def __len__(self):
        return len(self.maps)

    def __getitem__(self, letter: int) -> AnalyticMap:
        """1-based access."""
        return self.maps[letter - 1]

    @property
    def sources(self) -> list[str]:
        return [m.source for m in self.maps]

    @cached_property
    def c_max(self) -> Interval:
        """Bracket of max_i sup_[0,1] |f_i'|."""
        b = [m.deriv_upper for m in self.maps]
        return Interval(max(i.lo for i in b), max(i.hi for i in b))

    @cached_property
    def c_min(self) -> Interval:
        b = [m.deriv_lower for m in self.maps]
        return Interval(min(i.lo for i in b), min(i.hi for i in b))

    @cached_property
    def beta(self) -> Interval:
        """Bracket of max_i sup |f_i''/f_i'|."""
        b = [m.second_over_first_upper for m in self.maps]
        return Interval(max(i.lo for i in b), max(i.hi for i in b))

    def D(self, k: int) -> float:
        """Upper bound for max_i sup |(log|f_i'|)^(k)| over [0,1]."""
        return self._D_cache(k)

    def _D_cache(self, k: int) -> float:
        cache = self.__dict__.setdefault("_dk", {})
        if k not in cache:
            vals = [enclose_fn(m.log_deriv_fn(k), UNIT, 1e-10).abs_sup().hi for m in self.maps]
            cache[k] = max(vals)
        return cache[k]

    @property
    def C0(self) -> float:
        """Sup-norm bound D_1/(1 - c_max) for every dual projection."""
        return _up_div(self.D(1), 1.0 - self.c_max.hi)


def _up_div(a: float, b: float) -> float:
    return (Interval.of(a) / Interval.of(b)).hi


def fixed_point(fmap: AnalyticMap, tol: float = 1e-14) -> float:
    """The unique fixed point in [0,1], by bisection on f(x) - x."""
    lo, hi = 0.0, 1.0
    glo = fmap(lo) - lo
    if glo == 0.0:
        return lo
    ghi = fmap(hi) - hi
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        raise DomainError("no sign change of f(x) - x on [0,1]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        gm = fmap(mid) - mid
        if gm == 0.0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)

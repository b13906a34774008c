"""Expression trees for maps of one variable, with a parser and printer.

Grammar (EBNF)::

    expr    = term , { ( "+" | "-" ) , term } ;
    term    = unary , { ( "*" | "/" ) , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , { "^" , integer } ;
    atom    = number | "x" | "exp" , "(" , expr , ")" | "(" , expr , ")" ;
    number  = digits , [ "." , digits ] , [ ( "e" | "E" ) , [ "+" | "-" ] , digits ] ;
    integer = digits ;

Binary operators are left associative, so ``x^2^3`` is ``(x^2)^3`` and
``a - b - c`` is ``(a - b) - c``. Numeric literals are kept exactly as
``Fraction`` values.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
import numpy as np

from .errors import DomainError, ExprSyntaxError
from .interval import Interval, IntervalArray
from .jet import Jet


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return to_source(self)

    # building helpers so trees can be written with operators
    def __add__(self, o):
        return Add(self, as_expr(o))

    def __radd__(self, o):
        return Add(as_expr(o), self)

    def __sub__(self, o):
        return Sub(self, as_expr(o))

    def __rsub__(self, o):
        return Sub(as_expr(o), self)

    def __mul__(self, o):
        return Mul(self, as_expr(o))

    def __rmul__(self, o):
        return Mul(as_expr(o), self)

    def __truediv__(self, o):
        return Div(self, as_expr(o))

    def __rtruediv__(self, o):
        return Div(as_expr(o), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, n: int):
        return IntPow(self, n)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: Fraction


@dataclass(frozen=True, slots=True)
class Var(Expr):
    pass


@dataclass(frozen=True, slots=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class IntPow(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 0:
            raise ValueError("exponent must be a nonnegative integer")


@dataclass(frozen=True, slots=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


X = Var()


def const(v) -> Expr:
    """Literal node; negative values become Neg(Const) so they print and re-parse identically."""
    q = v if isinstance(v, Fraction) else Fraction(v)
    if q < 0:
        return Neg(Const(-q))
    return Const(q)


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return const(v)


def exp(e) -> Exp:
    return Exp(as_expr(e))


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    pos = 0
    toks = []
    n = len(src)
    while True:
        while pos < n and src[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos, src)
        start = m.start(m.lastgroup)
        toks.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(msg, tok[2], self.src)

    def expect(self, op):
        t = self.peek()
        if t[0] != "op" or t[1] != op:
            what = "end of input" if t[0] == "end" else repr(t[1])
            self.fail(f"expected {op!r}, found {what}")
        return self.take()

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            right = self.unary()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        while self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            t = self.peek()
            if t[0] != "num" or not t[1].isdigit():
                self.fail("exponent must be a nonnegative integer literal")
            self.take()
            base = IntPow(base, int(t[1]))
        return base

    def atom(self) -> Expr:
        t = self.peek()
        kind, text, _ = t
        if kind == "num":
            self.take()
            return Const(Fraction(text))
        if kind == "name":
            if text == "x":
                self.take()
                return Var()
            if text == "exp":
                self.take()
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return Exp(inner)
            self.fail(f"unknown name {text!r}")
        if kind == "op" and text == "(":
            self.take()
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "end":
            self.fail("unexpected end of input")
        self.fail(f"unexpected {text!r}")


def parse_expr(source: str) -> Expr:
    """Parse without the denominator check."""
    return _Parser(source).parse()


def parse_map(source: str, epsilon: float = 0.05) -> Expr:
    """Parse ``source`` and check that every denominator stays away from zero on [-ε, 1+ε]."""
    e = parse_expr(source)
    check_denominators(e, Interval(-epsilon, 1.0 + epsilon))
    return e


def denominators(e: Expr):
    if isinstance(e, Div):
        yield e.right
    for child in children(e):
        yield from denominators(child)


def children(e: Expr) -> tuple:
    if isinstance(e, (Add, Sub, Mul, Div)):
        return (e.left, e.right)
    if isinstance(e, IntPow):
        return (e.base,)
    if isinstance(e, (Exp, Neg)):
        return (e.arg,)
    return ()


def check_denominators(e: Expr, domain: Interval, max_depth: int = 30) -> None:
    for den in denominators(e):
        if not _bounded_away_from_zero(den, domain, max_depth):
            raise DomainError(f"denominator {to_source(den)} may vanish on [{domain.lo}, {domain.hi}]")


def _bounded_away_from_zero(den: Expr, domain: Interval, max_depth: int) -> bool:
    stack = [(domain, 0)]
    while stack:
        piece, depth = stack.pop()
        try:
            v = evaluate(den, piece)
        except DomainError:
            v = None
        if v is not None and not (v.lo <= 0.0 <= v.hi):
            continue
        m = piece.mid
        try:
            pv = evaluate(den, Interval.point(m))
            if pv.lo <= 0.0 <= pv.hi:
                return False
        except DomainError:
            return False
        if depth >= max_depth:
            return False
        a, b = piece.split()
        stack.append((a, depth + 1))
        stack.append((b, depth + 1))
    return True


# ---------------------------------------------------------------- printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, IntPow: 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Const) and e.value < 0:
        return 3
    return _PREC.get(type(e), 5)


def format_fraction(q: Fraction) -> str:
    """Exact decimal text for terminating fractions, otherwise ``(p/q)``."""
    if q.denominator == 1:
        return str(q.numerator)
    d = q.denominator
    a = b = 0
    while d % 2 == 0:
        d //= 2
        a += 1
    while d % 5 == 0:
        d //= 5
        b += 1
    if d != 1:
        return f"({q.numerator}/{q.denominator})"
    k = max(a, b)
    mant = q.numerator * 10**k // q.denominator
    sign = "-" if mant < 0 else ""
    digits = str(abs(mant))
    if k > 40:
        # scientific form keeps tiny values short; exponent syntax is exact
        e10 = len(digits) - 1 - k
        return f"{sign}{digits[0]}.{digits[1:]}e{e10}" if len(digits) > 1 else f"{sign}{digits}e{e10}"
    digits = digits.rjust(k + 1, "0")
    return f"{sign}{digits[:-k]}.{digits[-k:]}"


def to_source(e: Expr) -> str:
    if isinstance(e, Const):
        return format_fraction(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Exp):
        return f"exp({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        if _prec(e.arg) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, IntPow):
        inner = to_source(e.base)
        if _prec(e.base) < 4:
            inner = f"({inner})"
        return f"{inner}^{e.exponent}"
    p = _PREC[type(e)]
    sym = {Add: " + ", Sub: " - ", Mul: "*", Div: "/"}[type(e)]
    left = to_source(e.left)
    if _prec(e.left) < p:
        left = f"({left})"
    right = to_source(e.right)
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left}{sym}{right}"


# ---------------------------------------------------------------- evaluation


def _const_like(q: Fraction, x):
    if isinstance(x, Jet):
        return Jet.constant(_const_like(q, x.d[0]), x.order)
    if isinstance(x, (Interval, IntervalArray)):
        return Interval.from_fraction(q)
    if isinstance(x, Fraction):
        return q
    return float(q)


def _exp_of(v):
    if isinstance(v, Jet):
        return v.exp()
    if isinstance(v, (Interval, IntervalArray)):
        return v.exp()
    if isinstance(v, Fraction):
        return math.exp(v)
    if isinstance(v, np.ndarray):
        return np.exp(v)
    return math.exp(v)


def _div(a, b):
    try:
        if isinstance(b, Jet):
            if isinstance(b.d[0], Interval):
                if b.d[0].lo <= 0.0 <= b.d[0].hi:
                    raise DomainError("division by an enclosure of zero")
            elif isinstance(b.d[0], IntervalArray):
                if np.any(b.d[0].contains_zero()):
                    raise DomainError("division by an enclosure of zero")
            elif not isinstance(b.d[0], np.ndarray) and b.d[0] == 0:
                raise DomainError("division by zero")
        return a / b
    except ZeroDivisionError as exc:
        raise DomainError(str(exc)) from None


def evaluate(e: Expr, x):
    """Evaluate at a float, Fraction, numpy array, Interval or Jet."""
    if isinstance(e, Var):
        return x
    if isinstance(e, Const):
        return _const_like(e.value, x)
    if isinstance(e, Add):
        return evaluate(e.left, x) + evaluate(e.right, x)
    if isinstance(e, Sub):
        return evaluate(e.left, x) - evaluate(e.right, x)
    if isinstance(e, Mul):
        return evaluate(e.left, x) * evaluate(e.right, x)
    if isinstance(e, Div):
        return _div(evaluate(e.left, x), evaluate(e.right, x))
    if isinstance(e, Neg):
        return -evaluate(e.arg, x)
    if isinstance(e, IntPow):
        b = evaluate(e.base, x)
        if e.exponent == 0:
            return _const_like(Fraction(1), x)
        return b**e.exponent
    if isinstance(e, Exp):
        return _exp_of(evaluate(e.arg, x))
    raise TypeError(f"unknown node {e!r}")


def _py_source(e: Expr) -> str:
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Neg):
        return f"(-{_py_source(e.arg)})"
    if isinstance(e, Exp):
        return f"_exp({_py_source(e.arg)})"
    if isinstance(e, IntPow):
        if e.exponent == 0:
            return "(x*0.0+1.0)"
        return f"({_py_source(e.base)}**{e.exponent})"
    sym = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    return f"({_py_source(e.left)}{sym}{_py_source(e.right)})"


def compile_expr(e: Expr, vectorized: bool = False):
    """Compile to a plain Python callable for fast float (or numpy array) evaluation."""
    src = f"lambda x: {_py_source(e)}"
    ns = {"_exp": np.exp if vectorized else math.exp}
    return eval(src, ns)  # noqa: S307 - source is generated from a validated tree


def node_count(e: Expr) -> int:
    return 1 + sum(node_count(c) for c in children(e))



def substitute(e: Expr, inner: Expr) -> Expr:
    """The tree of e∘inner: every occurrence of x replaced by ``inner``."""
    if isinstance(e, Var):
        return inner
    if isinstance(e, Const):
        return e
    if isinstance(e, (Add, Sub, Mul, Div)):
        return type(e)(substitute(e.left, inner), substitute(e.right, inner))
    if isinstance(e, IntPow):
        return IntPow(substitute(e.base, inner), e.exponent)
    return type(e)(substitute(e.arg, inner))

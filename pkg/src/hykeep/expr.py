"""Expressions extending polynomials with quotients, sin/cos of a variable,
exact multiples of pi and square roots of positive rationals.

The text grammar is the usual infix one::

    1 + 2*e*h        cos(phi)        pi/4        (1 + 2*e*h)/e^2     sqrt(2)/2

``^`` and ``**`` both denote integer powers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import mpmath

from .poly import Polynomial, UnboundSymbol, UnknownVariable, ZeroDivisor, var_rank

__all__ = [
    "Expr",
    "PolyLeaf",
    "Quotient",
    "Sin",
    "Cos",
    "PiConst",
    "SqrtConst",
    "Sum",
    "Product",
    "Neg",
    "parse_expr",
    "ParseError",
    "DivisionByZero",
    "to_expr",
    "expr_lie",
    "ext_lie",
    "ext_symbol_value",
    "rational_form",
    "ext_to_expr",
]

PI_MP_PREC = 128


class ParseError(ValueError):
    pass


class DivisionByZero(ZeroDivisionError):
    pass


class Expr:
    """Base class; nodes are frozen dataclasses and compare structurally."""

    # -- arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        other = to_expr(other)
        if isinstance(self, PolyLeaf) and isinstance(other, PolyLeaf):
            return PolyLeaf(self.poly + other.poly)
        return Sum(_flat(Sum, (self, other)))

    def __radd__(self, other):
        return to_expr(other) + self

    def __neg__(self):
        if isinstance(self, PolyLeaf):
            return PolyLeaf(-self.poly)
        if isinstance(self, Neg):
            return self.arg
        return Neg(self)

    def __sub__(self, other):
        return self + (-to_expr(other))

    def __rsub__(self, other):
        return to_expr(other) - self

    def __mul__(self, other):
        other = to_expr(other)
        if isinstance(self, PolyLeaf) and isinstance(other, PolyLeaf):
            return PolyLeaf(self.poly * other.poly)
        for a, b in ((self, other), (other, self)):
            if isinstance(a, PiConst) and isinstance(b, PolyLeaf) and b.poly.is_constant():
                return PiConst(a.coef * b.poly.constant_value())
        return Product(_flat(Product, (self, other)))

    def __rmul__(self, other):
        return to_expr(other) * self

    def __truediv__(self, other):
        other = to_expr(other)
        if isinstance(other, PolyLeaf) and other.poly.is_constant():
            c = other.poly.constant_value()
            if c == 0:
                raise DivisionByZero("division by constant zero")
            return self * PolyLeaf(Polynomial.const(1 / c))
        if isinstance(other, PolyLeaf) and other.poly.is_zero():
            raise DivisionByZero("division by zero")
        return Quotient(self, other)

    def __rtruediv__(self, other):
        return to_expr(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a non-negative integer")
        if isinstance(self, PolyLeaf):
            return PolyLeaf(self.poly**n)
        if n == 0:
            return PolyLeaf(Polynomial.const(1))
        if n == 1:
            return self
        return Product(tuple([self] * n))

    # -- queries ------------------------------------------------------------
    def free_symbols(self) -> frozenset:
        raise NotImplementedError

    def is_polynomial(self) -> bool:
        num, den = rational_form(self)
        return den.is_constant() and not any(
            _is_ext(v) for v in num.variables
        )

    def as_polynomial(self) -> Polynomial:
        num, den = rational_form(self)
        if not den.is_constant() or any(_is_ext(v) for v in num.variables):
            raise ValueError(f"not a polynomial: {self}")
        return num * (1 / den.constant_value())

    def evaluate(self, point: Mapping[str, object], mode: str | None = None):
        """Evaluate at ``point``.

        ``mode`` is ``"exact"`` (Fractions, only for expressions without
        trigonometric or irrational constants), ``"float"`` or ``"mp"``
        (mpmath at 128 bits). By default the mode follows the point's
        value types: all-Fraction points evaluate exactly when possible.
        """
        if mode is None:
            exactish = all(isinstance(v, (int, Fraction)) for v in point.values())
            mode = "exact" if exactish and not self._transcendental() else "float"
        if mode == "mp":
            with mpmath.workprec(PI_MP_PREC):
                return self._eval(point, mode)
        return self._eval(point, mode)

    def _transcendental(self) -> bool:
        return False

    def _eval(self, point, mode):
        raise NotImplementedError

    def __str__(self):
        return self._str(0)

    def __repr__(self):
        return f"Expr({str(self)!r})"


def _flat(cls, items):
    out = []
    for it in items:
        if isinstance(it, cls):
            out.extend(it.args)
        else:
            out.append(it)
    return tuple(out)


def _is_ext(sym: str) -> bool:
    return "(" in sym or sym == "pi"


def to_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Polynomial):
        return PolyLeaf(x)
    if isinstance(x, (int, Fraction)):
        return PolyLeaf(Polynomial.const(x))
    if isinstance(x, str):
        return parse_expr(x)
    raise TypeError(f"cannot convert {x!r} to an expression")


# precedence levels for printing
_P_SUM, _P_PROD, _P_UNARY, _P_ATOM = 1, 2, 3, 4


@dataclass(frozen=True, eq=True)
class PolyLeaf(Expr):
    poly: Polynomial

    def free_symbols(self):
        return frozenset(self.poly.variables)

    def _eval(self, point, mode):
        total = _zero(mode)
        for m, c in self.poly.items():
            val = _coef(c, mode)
            for v, k in m:
                if v not in point:
                    raise UnboundSymbol(v)
                val = val * _num(point[v], mode) ** k
            total = total + val
        return total

    def _str(self, prec):
        s = str(self.poly)
        p = self.poly
        single = len(p) <= 1
        if single and not s.startswith("-"):
            need = prec > _P_PROD and ("*" in s or "/" in s)
        elif single:
            need = prec >= _P_UNARY
        else:
            need = prec > _P_SUM
        return f"({s})" if need else s


@dataclass(frozen=True, eq=True)
class Quotient(Expr):
    num: Expr
    den: Expr

    def __post_init__(self):
        if isinstance(self.den, PolyLeaf) and self.den.poly.is_zero():
            raise DivisionByZero("quotient with zero denominator")

    def free_symbols(self):
        return self.num.free_symbols() | self.den.free_symbols()

    def _transcendental(self):
        return self.num._transcendental() or self.den._transcendental()

    def _eval(self, point, mode):
        d = self.den._eval(point, mode)
        if d == 0:
            raise DivisionByZero(f"denominator {self.den} vanishes")
        return self.num._eval(point, mode) / d

    def _str(self, prec):
        s = f"{self.num._str(_P_PROD)}/{self.den._str(_P_UNARY)}"
        return f"({s})" if prec > _P_PROD else s


@dataclass(frozen=True, eq=True)
class Sin(Expr):
    var: str

    def free_symbols(self):
        return frozenset({self.var})

    def _transcendental(self):
        return True

    def _eval(self, point, mode):
        if self.var not in point:
            raise UnboundSymbol(self.var)
        x = _num(point[self.var], mode)
        return mpmath.sin(x) if mode == "mp" else math.sin(x)

    def _str(self, prec):
        return f"sin({self.var})"


@dataclass(frozen=True, eq=True)
class Cos(Expr):
    var: str

    def free_symbols(self):
        return frozenset({self.var})

    def _transcendental(self):
        return True

    def _eval(self, point, mode):
        if self.var not in point:
            raise UnboundSymbol(self.var)
        x = _num(point[self.var], mode)
        return mpmath.cos(x) if mode == "mp" else math.cos(x)

    def _str(self, prec):
        return f"cos({self.var})"


@dataclass(frozen=True, eq=True)
class PiConst(Expr):
    coef: Fraction

    def free_symbols(self):
        return frozenset()

    def _transcendental(self):
        return True

    def _eval(self, point, mode):
        if mode == "mp":
            return mpmath.mpf(self.coef.numerator) * mpmath.pi / self.coef.denominator
        return float(self.coef) * math.pi

    def _str(self, prec):
        c = self.coef
        if c == 1:
            s = "pi"
        elif c == -1:
            s = "-pi"
        elif c.denominator == 1:
            s = f"{c.numerator}*pi"
        elif c.numerator == 1:
            s = f"pi/{c.denominator}"
        else:
            s = f"{c.numerator}*pi/{c.denominator}"
        if s.startswith("-") and prec >= _P_UNARY:
            return f"({s})"
        return f"({s})" if prec > _P_PROD and s != "pi" else s


@dataclass(frozen=True, eq=True)
class SqrtConst(Expr):
    """Square root of a positive rational constant."""

    radicand: Fraction

    def __post_init__(self):
        if self.radicand <= 0:
            raise ValueError("sqrt of a non-positive constant")

    def free_symbols(self):
        return frozenset()

    def _transcendental(self):
        return True

    def _eval(self, point, mode):
        if mode == "mp":
            return mpmath.sqrt(mpmath.mpf(self.radicand.numerator) / self.radicand.denominator)
        return math.sqrt(float(self.radicand))

    def _str(self, prec):
        r = self.radicand
        return f"sqrt({r.numerator})" if r.denominator == 1 else f"sqrt({r.numerator}/{r.denominator})"


@dataclass(frozen=True, eq=True)
class Sum(Expr):
    args: tuple

    def free_symbols(self):
        return frozenset().union(*(a.free_symbols() for a in self.args))

    def _transcendental(self):
        return any(a._transcendental() for a in self.args)

    def _eval(self, point, mode):
        total = _zero(mode)
        for a in self.args:
            total = total + a._eval(point, mode)
        return total

    def _str(self, prec):
        out = self.args[0]._str(_P_SUM)
        for a in self.args[1:]:
            s = a._str(_P_SUM)
            if s.startswith("-"):
                out += " - " + s[1:]
            else:
                out += " + " + s
        return f"({out})" if prec > _P_SUM else out


@dataclass(frozen=True, eq=True)
class Product(Expr):
    args: tuple

    def free_symbols(self):
        return frozenset().union(*(a.free_symbols() for a in self.args))

    def _transcendental(self):
        return any(a._transcendental() for a in self.args)

    def _eval(self, point, mode):
        total = _one(mode)
        for a in self.args:
            total = total * a._eval(point, mode)
        return total

    def _str(self, prec):
        coef = Fraction(1)
        rest = []
        for a in self.args:
            if isinstance(a, PolyLeaf) and a.poly.is_constant():
                coef *= a.poly.constant_value()
            else:
                rest.append(a)
        if not rest:
            return PolyLeaf(Polynomial.const(coef))._str(prec)
        s = "*".join(a._str(_P_PROD) for a in rest)
        if abs(coef.numerator) != 1:
            s = f"{abs(coef.numerator)}*{s}"
        if coef.denominator != 1:
            s = f"{s}/{coef.denominator}"
        if coef < 0:
            s = "-" + s
            return f"({s})" if prec >= _P_UNARY else s
        return f"({s})" if prec > _P_PROD else s


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr

    def free_symbols(self):
        return self.arg.free_symbols()

    def _transcendental(self):
        return self.arg._transcendental()

    def _eval(self, point, mode):
        return -self.arg._eval(point, mode)

    def _str(self, prec):
        s = "-" + self.arg._str(_P_UNARY)
        return f"({s})" if prec >= _P_UNARY else s


def _zero(mode):
    return Fraction(0) if mode == "exact" else (mpmath.mpf(0) if mode == "mp" else 0.0)


def _one(mode):
    return Fraction(1) if mode == "exact" else (mpmath.mpf(1) if mode == "mp" else 1.0)


def _coef(c: Fraction, mode):
    if mode == "exact":
        return c
    if mode == "mp":
        return mpmath.mpf(c.numerator) / c.denominator
    return float(c)


def _num(x, mode):
    if mode == "exact":
        if isinstance(x, (int, Fraction)):
            return Fraction(x)
        raise TypeError("exact evaluation needs rational inputs")
    if mode == "mp":
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        return mpmath.mpf(x)
    return float(x)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        if m.group("num") is not None:
            out.append(("num", m.group("num")))
        elif m.group("name") is not None:
            out.append(("name", m.group("name")))
        else:
            out.append(("op", m.group("op")))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0
        self.text = text

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, kind=None, val=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (val and tok[1] != val):
            raise ParseError(f"expected {val or kind} in {self.text!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        e = self.sum()
        if self.i != len(self.toks):
            raise ParseError(f"trailing input in {self.text!r}: {self.peek()[1]!r}")
        return e

    def sum(self):
        e = self.product()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.product()
            e = e + rhs if op == "+" else e - rhs
        return e

    def product(self):
        e = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            e = _keep_factored(e, rhs) if op == "*" else e / rhs
        return e

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return -self.unary()
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() in (("op", "^"), ("op", "**")):
            self.take()
            if self.peek() == ("op", "-"):
                raise ParseError("negative exponents are not supported")
            tok = self.take("num")
            if not re.fullmatch(r"\d+", tok[1]):
                raise ParseError("exponent must be a non-negative integer")
            return base ** int(tok[1])
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return PolyLeaf(Polynomial.const(Fraction(val)))
        if kind == "name":
            self.take()
            if val == "pi":
                return PiConst(Fraction(1))
            if self.peek() == ("op", "("):
                self.take()
                arg = self.sum()
                self.take("op", ")")
                return _call(val, arg)
            return PolyLeaf(Polynomial.var(val))
        if (kind, val) == ("op", "("):
            self.take()
            e = self.sum()
            self.take("op", ")")
            return e
        raise ParseError(f"unexpected token {val!r} in {self.text!r}")


def _split_coef(x: Expr):
    if isinstance(x, PolyLeaf) and len(x.poly) == 1:
        (m, c), = x.poly.items()
        if c != 1 and m:
            return [PolyLeaf(Polynomial.const(c)), PolyLeaf(Polynomial({m: 1}))]
    return [x]


def _keep_factored(a: Expr, b: Expr) -> Expr:
    """Product that keeps non-constant polynomial factors apart.

    Expanding (h+1)*g into g*h + g loses the factored shape that gives
    tight interval enclosures, so written products stay products.
    """
    for x in (a, b):
        if isinstance(x, PolyLeaf) and x.poly.is_constant():
            return a * b
    if isinstance(a, PolyLeaf) and isinstance(b, PolyLeaf) and len(a.poly) == 1 and len(b.poly) == 1:
        return a * b
    parts = []
    for x in (a, b):
        if isinstance(x, Product):
            parts.extend(x.args)
        else:
            parts.extend(_split_coef(x))
    coef = Fraction(1)
    rest = []
    for x in parts:
        if isinstance(x, PolyLeaf) and x.poly.is_constant():
            coef *= x.poly.constant_value()
        else:
            rest.append(x)
    if coef != 1:
        rest.insert(0, PolyLeaf(Polynomial.const(coef)))
    return Product(tuple(rest))


def _call(name, arg: Expr) -> Expr:
    if name in ("sin", "cos"):
        if not (isinstance(arg, PolyLeaf) and len(arg.poly.variables) == 1
                and arg.poly == Polynomial.var(arg.poly.variables[0])):
            raise ParseError(f"{name}() applies to a single variable only")
        v = arg.poly.variables[0]
        return Sin(v) if name == "sin" else Cos(v)
    if name == "sqrt":
        if not (isinstance(arg, PolyLeaf) and arg.poly.is_constant()):
            raise ParseError("sqrt() applies to positive rational constants only")
        r = arg.poly.constant_value()
        if r <= 0:
            raise ParseError("sqrt() needs a positive constant")
        outside, inside = _split_square(r)
        if inside == 1:
            return PolyLeaf(Polynomial.const(outside))
        return SqrtConst(inside) * outside
    raise ParseError(f"unknown function {name!r}")


def _split_square(r: Fraction) -> tuple[Fraction, Fraction]:
    """Write r = outside^2 * inside with inside a square-free integer ratio."""

    def part(n):
        out, k = 1, 2
        while k * k <= n and k < 10_000:
            while n % (k * k) == 0:
                n //= k * k
                out *= k
            k += 1
        return out, n

    on, n_in = part(r.numerator)
    od, d_in = part(r.denominator)
    # sqrt(a/b) = sqrt(a*b)/b keeps the radicand integral
    inside = n_in * d_in
    return Fraction(on, od * d_in), Fraction(inside)


def parse_expr(text: str) -> Expr:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# rational normal form over extended symbols
# ---------------------------------------------------------------------------
#
# sin(v), cos(v), pi and sqrt(r) become polynomial symbols named exactly as
# they print. sqrt(r)^2 is reduced to r.


def _sqrt_sym(r: Fraction) -> str:
    return str(SqrtConst(r))


def _reduce_sqrt(p: Polynomial) -> Polynomial:
    subs = {}
    for v in p.variables:
        if v.startswith("sqrt(") and p.degree(v) >= 2:
            subs[v] = v
    if not subs:
        return p
    out: dict = {}
    for m, c in p.terms.items():
        nm = []
        for v, k in m:
            if v in subs and k >= 2:
                r = Fraction(v[5:-1])
                c = c * r ** (k // 2)
                k = k % 2
            if k:
                nm.append((v, k))
        nm = tuple(nm)
        out[nm] = out.get(nm, 0) + c
    return Polynomial(out)


def rational_form(x: Expr) -> tuple[Polynomial, Polynomial]:
    """Return (numerator, denominator) polynomials over extended symbols."""
    if isinstance(x, PolyLeaf):
        return x.poly, Polynomial.const(1)
    if isinstance(x, Sin):
        return Polynomial.var(f"sin({x.var})"), Polynomial.const(1)
    if isinstance(x, Cos):
        return Polynomial.var(f"cos({x.var})"), Polynomial.const(1)
    if isinstance(x, PiConst):
        return Polynomial.var("pi") * x.coef, Polynomial.const(1)
    if isinstance(x, SqrtConst):
        return Polynomial.var(_sqrt_sym(x.radicand)), Polynomial.const(1)
    if isinstance(x, Neg):
        n, d = rational_form(x.arg)
        return -n, d
    if isinstance(x, Sum):
        n, d = rational_form(x.args[0])
        for a in x.args[1:]:
            n2, d2 = rational_form(a)
            if d == d2:
                n = n + n2
            else:
                n, d = n * d2 + n2 * d, d * d2
        return _reduce_sqrt(n), _reduce_sqrt(d)
    if isinstance(x, Product):
        n, d = Polynomial.const(1), Polynomial.const(1)
        for a in x.args:
            n2, d2 = rational_form(a)
            n, d = n * n2, d * d2
        return _reduce_sqrt(n), _reduce_sqrt(d)
    if isinstance(x, Quotient):
        n1, d1 = rational_form(x.num)
        n2, d2 = rational_form(x.den)
        if n2.is_zero():
            raise DivisionByZero(f"denominator {x.den} is identically zero")
        n, d = n1 * d2, d1 * n2
        q = n.try_divide(d) if not d.is_constant() else None
        if q is not None:
            return _reduce_sqrt(q), Polynomial.const(1)
        if d.is_constant():
            return n * (1 / d.constant_value()), Polynomial.const(1)
        return _reduce_sqrt(n), _reduce_sqrt(d)
    raise TypeError(f"unknown expression node {type(x).__name__}")


def ext_to_expr(p: Polynomial) -> Expr:
    """Inverse of the symbol encoding used by :func:`rational_form`."""
    out: Expr | None = None
    for m, c in p.items():
        poly_part = []
        extras: list[Expr] = []
        coef = c
        for v, k in m:
            if v == "pi":
                extras.extend([PiConst(Fraction(1))] * k)
            elif v.startswith("sin("):
                extras.extend([Sin(v[4:-1])] * k)
            elif v.startswith("cos("):
                extras.extend([Cos(v[4:-1])] * k)
            elif v.startswith("sqrt("):
                extras.extend([SqrtConst(Fraction(v[5:-1]))] * k)
            else:
                poly_part.append((v, k))
        if len(extras) == 1 and isinstance(extras[0], PiConst) and not poly_part:
            term: Expr = PiConst(Fraction(coef))
        else:
            term = PolyLeaf(Polynomial({tuple(poly_part): coef}))
            for x in extras:
                term = term * x
        out = term if out is None else out + term
    return out if out is not None else PolyLeaf(Polynomial())


def ext_symbol_value(sym: str, point: Mapping[str, object], mode: str = "float"):
    """Numeric value of an extended symbol at a base point."""
    if sym == "pi":
        return mpmath.mpf(mpmath.pi) if mode == "mp" else math.pi
    if sym.startswith("sqrt("):
        r = Fraction(sym[5:-1])
        if mode == "mp":
            return mpmath.sqrt(mpmath.mpf(r.numerator) / r.denominator)
        return math.sqrt(float(r))
    if sym.startswith("sin(") or sym.startswith("cos("):
        x = point[sym[4:-1]]
        if mode == "mp":
            x = _num(x, "mp")
            return mpmath.sin(x) if sym[0] == "s" else mpmath.cos(x)
        return math.sin(float(x)) if sym[0] == "s" else math.cos(float(x))
    return point[sym]


# ---------------------------------------------------------------------------
# Lie derivatives
# ---------------------------------------------------------------------------

def ext_lie(p: Polynomial, field: Mapping[str, Polynomial]) -> Polynomial:
    """Lie derivative of a polynomial over extended symbols.

    d/dt sin(v) = cos(v)*f_v and d/dt cos(v) = -sin(v)*f_v; pi and
    square roots are constants.
    """
    out = Polynomial()
    for v in p.variables:
        dv = p.diff(v)
        if v == "pi" or v.startswith("sqrt("):
            continue
        if v.startswith("sin("):
            base = v[4:-1]
            if base not in field:
                raise UnknownVariable(base)
            out = out + dv * Polynomial.var(f"cos({base})") * field[base]
        elif v.startswith("cos("):
            base = v[4:-1]
            if base not in field:
                raise UnknownVariable(base)
            out = out - dv * Polynomial.var(f"sin({base})") * field[base]
        else:
            if v not in field:
                raise UnknownVariable(v)
            out = out + dv * field[v]
    return _reduce_sqrt(out)


def expr_lie(x: Expr, field: Mapping[str, Polynomial]) -> Expr:
    """Lie derivative of an expression, quotient rule for rational parts."""
    n, d = rational_form(x)
    dn = ext_lie(n, field)
    if d.is_constant():
        return ext_to_expr(dn * (1 / d.constant_value()))
    dd = ext_lie(d, field)
    num = dn * d - n * dd
    q = num.try_divide(d)
    if q is not None:
        return Quotient(ext_to_expr(q), ext_to_expr(d)) if not q.is_zero() else PolyLeaf(Polynomial())
    return Quotient(ext_to_expr(num), ext_to_expr(d * d))


def sorted_symbols(syms) -> list:
    return sorted(syms, key=var_rank)

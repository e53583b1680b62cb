"""Sparse multivariate polynomials with exact rational coefficients.

Monomials are tuples of ``(symbol, exponent)`` pairs sorted by a fixed
variable rank, so polynomials over different symbol sets combine without
any re-alignment. Terms are ordered graded-lexicographically with the
state variables first: ``g > h > e > d > phi > alpha``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Iterable, Mapping, Union

__all__ = [
    "Polynomial",
    "Monomial",
    "UnknownVariable",
    "UnboundSymbol",
    "ZeroDivisor",
    "VAR_ORDER",
    "var_rank",
    "lie_derivative",
]

Monomial = tuple  # tuple[tuple[str, int], ...]
Number = Union[int, Fraction]

VAR_ORDER = ("g", "h", "e", "d", "phi", "alpha", "x", "y", "theta")
_RANK = {v: i for i, v in enumerate(VAR_ORDER)}


class UnknownVariable(KeyError):
    """A polynomial mentions a symbol the vector field does not define."""


class UnboundSymbol(KeyError):
    """Evaluation point does not bind every free symbol."""


class ZeroDivisor(ZeroDivisionError):
    pass


def var_rank(v: str) -> tuple:
    # derived symbols such as cos(phi), pi and sqrt(2) sort after plain variables
    if v in _RANK:
        return (0, _RANK[v], v)
    if "(" in v or v == "pi":
        return (2, 0, v)
    return (1, 0, v)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for v, k in b:
        exps[v] = exps.get(v, 0) + k
    return tuple(sorted(exps.items(), key=lambda it: var_rank(it[0])))


def _mono_div(a: Monomial, b: Monomial):
    """a / b if b divides a, else None."""
    exps = dict(a)
    for v, k in b:
        have = exps.get(v, 0)
        if have < k:
            return None
        if have == k:
            del exps[v]
        else:
            exps[v] = have - k
    return tuple(sorted(exps.items(), key=lambda it: var_rank(it[0])))


def mono_degree(m: Monomial) -> int:
    return sum(k for _, k in m)


def mono_key(m: Monomial):
    """Sort key; ascending order of keys is descending graded-lex order."""
    return (-mono_degree(m), tuple((var_rank(v), -k) for v, k in m))


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c)
    raise TypeError(f"not an exact coefficient: {c!r}")


class Polynomial:
    """Immutable sparse polynomial over the rationals."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Number] | None = None):
        clean = {}
        if terms:
            for m, c in terms.items():
                c = _as_fraction(c)
                if c:
                    clean[tuple(m)] = c
        self._terms = clean
        self._hash = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def const(cls, c: Number) -> "Polynomial":
        return cls({(): c})

    @classmethod
    def var(cls, name: str, power: int = 1) -> "Polynomial":
        if power == 0:
            return cls.const(1)
        return cls({((name, power),): 1})

    @classmethod
    def parse(cls, text: str) -> "Polynomial":
        from .expr import parse_expr

        return parse_expr(text).as_polynomial()

    @classmethod
    def coerce(cls, x) -> "Polynomial":
        if isinstance(x, Polynomial):
            return x
        if isinstance(x, str):
            return cls.parse(x)
        return cls.const(x)

    # -- structure --------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        """Terms in descending graded-lex order."""
        return sorted(self._terms.items(), key=lambda it: mono_key(it[0]))

    @property
    def variables(self) -> tuple:
        vs = {v for m in self._terms for v, _ in m}
        return tuple(sorted(vs, key=var_rank))

    def degree(self, var: str | None = None) -> int:
        if not self._terms:
            return -1
        if var is None:
            return max(mono_degree(m) for m in self._terms)
        return max(dict(m).get(var, 0) for m in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(m == () for m in self._terms)

    def constant_value(self) -> Fraction:
        return self._terms.get((), Fraction(0))

    def __len__(self):
        return len(self._terms)

    def leading_term(self):
        if not self._terms:
            raise ValueError("zero polynomial has no leading term")
        m = min(self._terms, key=mono_key)
        return m, self._terms[m]

    def leading_coefficient(self) -> Fraction:
        return self.leading_term()[1]

    def monic(self) -> "Polynomial":
        if self.is_zero():
            return self
        return self * (1 / self.leading_coefficient())

    def content(self) -> Fraction:
        """Positive rational gcd of the coefficients."""
        if not self._terms:
            return Fraction(0)
        nums = [abs(c.numerator) for c in self._terms.values()]
        dens = [c.denominator for c in self._terms.values()]
        num = reduce(gcd, nums)
        den = reduce(lambda a, b: a * b // gcd(a, b), dens)
        return Fraction(num, den)

    def monomial_content(self) -> Monomial:
        """Largest monomial dividing every term."""
        if not self._terms:
            return ()
        it = iter(self._terms)
        common = dict(next(it))
        for m in it:
            md = dict(m)
            for v in list(common):
                k = min(common[v], md.get(v, 0))
                if k:
                    common[v] = k
                else:
                    del common[v]
        return tuple(sorted(common.items(), key=lambda it: var_rank(it[0])))

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = Polynomial._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0) + c
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = Polynomial._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = Polynomial._lift(other)
        if other is NotImplemented:
            return other
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisor("division by zero constant")
            return self * (Fraction(1) / other)
        return NotImplemented

    @staticmethod
    def _lift(x):
        if isinstance(x, Polynomial):
            return x
        if isinstance(x, (int, Fraction)):
            return Polynomial.const(x)
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.const(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    # -- calculus and substitution ------------------------------------------
    def diff(self, var: str) -> "Polynomial":
        out: dict = {}
        for m, c in self._terms.items():
            md = dict(m)
            k = md.get(var, 0)
            if not k:
                continue
            if k == 1:
                del md[var]
            else:
                md[var] = k - 1
            nm = tuple(sorted(md.items(), key=lambda it: var_rank(it[0])))
            out[nm] = out.get(nm, 0) + c * k
        return Polynomial(out)

    def subs(self, mapping: Mapping[str, "Polynomial | Number"]) -> "Polynomial":
        """Simultaneous substitution of polynomials for symbols."""
        mapping = {k: Polynomial.coerce(v) for k, v in mapping.items()}
        out = Polynomial()
        cache: dict = {}
        for m, c in self._terms.items():
            term = Polynomial.const(c)
            rest = []
            for v, k in m:
                if v in mapping:
                    key = (v, k)
                    if key not in cache:
                        cache[key] = mapping[v] ** k
                    term = term * cache[key]
                else:
                    rest.append((v, k))
            if rest:
                term = term * Polynomial({tuple(rest): 1})
            out = out + term
        return out

    def evaluate(self, point: Mapping[str, object]):
        """Evaluate at a point. Fractions give exact results, floats give floats."""
        total = 0
        for m, c in self._terms.items():
            val = c
            for v, k in m:
                try:
                    x = point[v]
                except KeyError:
                    raise UnboundSymbol(v) from None
                val = val * x**k
            total = total + val
        if isinstance(total, Fraction) or isinstance(total, int):
            return Fraction(total)
        return total

    def float_value(self, point: Mapping[str, float]) -> float:
        total = 0.0
        for m, c in self._terms.items():
            val = float(c)
            for v, k in m:
                val *= point[v] ** k
            total += val
        return total

    def try_divide(self, den: "Polynomial"):
        """Exact quotient ``self / den`` or None.

        A single nonzero polynomial is a Groebner basis of the ideal it
        generates, so multivariate division leaves a zero remainder exactly
        when ``den`` divides ``self``.
        """
        if den.is_zero():
            raise ZeroDivisor("division by the zero polynomial")
        lm, lc = den.leading_term()
        rem = dict(self._terms)
        quot: dict = {}
        while rem:
            m = min(rem, key=mono_key)
            q = _mono_div(m, lm)
            if q is None:
                return None
            c = rem[m] / lc
            quot[q] = quot.get(q, 0) + c
            for m2, c2 in den._terms.items():
                mm = _mono_mul(q, m2)
                v = rem.get(mm, 0) - c * c2
                if v:
                    rem[mm] = v
                else:
                    rem.pop(mm, None)
        return Polynomial(quot)

    # -- printing -----------------------------------------------------------
    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for m, c in self.items():
            mono = "*".join(v if k == 1 else f"{v}^{k}" for v, k in m)
            ac = abs(c)
            if not mono:
                body = _fmt_frac(ac)
            elif ac == 1:
                body = mono
            elif ac.denominator == 1:
                body = f"{ac.numerator}*{mono}"
            else:
                body = f"{ac.numerator}/{ac.denominator}*{mono}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"Polynomial({str(self)!r})"


def _fmt_frac(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def lie_derivative(p: Polynomial, field: Mapping[str, Polynomial]) -> Polynomial:
    """Sum over state variables of dp/dx_i * f_i."""
    out = Polynomial()
    for v in p.variables:
        if v not in field:
            raise UnknownVariable(v)
        out = out + p.diff(v) * field[v]
    return out


def monomial_poly(m: Monomial, c: Number = 1) -> Polynomial:
    return Polynomial({m: c})


def sum_polys(ps: Iterable[Polynomial]) -> Polynomial:
    out = Polynomial()
    for p in ps:
        out = out + p
    return out

"""Darboux polynomial search and rational first integrals.

For each candidate cofactor ``c`` from a finite template grid the equation
``lie(p) = c*p`` is linear in the coefficients of ``p``. A rank test modulo
a prime discards cofactors with trivial solution space cheaply (rank over
GF(q) never exceeds rank over Q); the rest are solved exactly with
fraction-free integer elimination.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, combinations_with_replacement, product
from math import comb, gcd, lcm

import numpy as np

from .dynamics import VectorField
from .expr import Expr, PolyLeaf, Quotient
from .poly import Polynomial, lie_derivative, mono_key, var_rank

__all__ = [
    "BudgetExceeded",
    "DarbouxPair",
    "FirstIntegral",
    "enumerate_cofactors",
    "search",
    "verify",
    "first_integrals",
    "monomials_upto",
    "primitive",
]

DEFAULT_CAP = 10**6
_PRIME = 2_147_483_629  # largest prime below 2**31; products fit in int64


class BudgetExceeded(RuntimeError):
    """A search grid exceeds the configured cap."""


@dataclass(frozen=True)
class DarbouxPair:
    p: Polynomial
    cofactor: Polynomial

    def __post_init__(self):
        if self.p.is_constant() and not self.p.is_zero() and self.cofactor.is_zero():
            return  # degenerate constant pair, allowed but filtered by search
        if self.p.is_constant():
            raise ValueError("Darboux polynomial must be non-constant")

    def to_json(self) -> dict:
        return {"p": str(self.p), "p_int": str(primitive(self.p)), "cofactor": str(self.cofactor)}


@dataclass(frozen=True)
class FirstIntegral:
    numerator: Polynomial
    denominator: Polynomial
    pairs: tuple
    exponents: tuple
    expr: Expr = field(compare=False)

    def identity_holds(self, f: VectorField) -> bool:
        """lie(N)*D - N*lie(D) vanishes identically."""
        fd = f.polynomials()
        n, d = self.numerator, self.denominator
        return (lie_derivative(n, fd) * d - n * lie_derivative(d, fd)).is_zero()

    def to_json(self) -> dict:
        return {
            "expr": str(self.expr),
            "exponents": list(self.exponents),
            "factors": [str(primitive(p.p)) for p in self.pairs],
        }


def monomials_upto(vars_, maxdeg: int, mindeg: int = 0) -> list:
    """Monomials over ``vars_`` with ``mindeg <= degree <= maxdeg``, descending grlex."""
    vars_ = sorted(vars_, key=var_rank)
    out = []
    for deg in range(mindeg, maxdeg + 1):
        for combo in combinations_with_replacement(vars_, deg):
            exps: dict = {}
            for v in combo:
                exps[v] = exps.get(v, 0) + 1
            out.append(tuple(sorted(exps.items(), key=lambda it: var_rank(it[0]))))
    return sorted(out, key=mono_key)


def primitive(p: Polynomial) -> Polynomial:
    """Integer primitive form with positive leading coefficient."""
    if p.is_zero():
        return p
    q = p * (1 / p.content())
    return -q if q.leading_coefficient() < 0 else q


def enumerate_cofactors(maxdeg: int, coeffs, maxterms: int, vars_=("g", "h", "e"),
                        cap: int = DEFAULT_CAP) -> list:
    """All polynomials of degree 1..maxdeg terms with at most ``maxterms`` terms.

    The zero polynomial comes first. Constant terms are not part of the
    grid: a nonzero constant cofactor would make every Darboux polynomial
    grow exponentially at a uniform rate, which these vehicle fields rule out.
    """
    if maxdeg < 0 or maxterms < 1:
        raise ValueError("need maxdeg >= 0 and maxterms >= 1")
    nz = sorted({Fraction(c) for c in coeffs if c != 0})
    monos = monomials_upto(vars_, maxdeg, mindeg=1)
    size = sum(comb(len(monos), k) * len(nz) ** k for k in range(0, maxterms + 1))
    if size > cap:
        raise BudgetExceeded(f"cofactor grid has {size} entries, cap is {cap}")
    out = [Polynomial()]
    seen = {Polynomial()}
    for k in range(1, maxterms + 1):
        for ms in combinations(monos, k):
            for cs in product(nz, repeat=k):
                p = Polynomial(dict(zip(ms, cs)))
                if p not in seen:
                    seen.add(p)
                    out.append(p)
    return out


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def _full_rank_mod_p(rows: np.ndarray) -> bool:
    """True if the integer matrix has full column rank modulo a prime."""
    a = np.mod(rows, _PRIME).astype(np.int64)
    nrows, ncols = a.shape
    r = 0
    for c in range(ncols):
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            return False
        piv = r + nz[0]
        if piv != r:
            a[[r, piv]] = a[[piv, r]]
        inv = pow(int(a[r, c]), _PRIME - 2, _PRIME)
        a[r] = (a[r] * inv) % _PRIME
        col = a[:, c].copy()
        col[r] = 0
        mask = col != 0
        if mask.any():
            a[mask] = (a[mask] - np.outer(col[mask], a[r]) % _PRIME) % _PRIME
        r += 1
        if r == nrows and c < ncols - 1:
            return False
    return True


def integer_nullspace(rows: list, ncols: int) -> list:
    """Basis of the rational nullspace as primitive integer vectors.

    Fraction-free Gauss-Jordan: rows stay integral and are divided by their
    gcd after every elimination step.
    """
    m = [list(r) for r in rows if any(r)]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pr = m[r]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                a, b = pr[c], m[i][c]
                row = [a * x - b * y for x, y in zip(m[i], pr)]
                g = 0
                for x in row:
                    g = gcd(g, x)
                m[i] = [x // g for x in row] if g > 1 else row
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for fcol in free:
        # x_f = L, x_p = -m[p][f] * L / m[p][p] with L the lcm of pivots
        L = 1
        for i, pc in enumerate(pivots):
            if m[i][fcol]:
                L = lcm(L, abs(m[i][pc]))
        vec = [0] * ncols
        vec[fcol] = L
        for i, pc in enumerate(pivots):
            if m[i][fcol]:
                vec[pc] = -m[i][fcol] * L // m[i][pc]
        g = 0
        for x in vec:
            g = gcd(g, x)
        basis.append([x // g for x in vec])
    return basis


def _rows_from_columns(cols: list) -> tuple:
    """Integer row matrix from column polynomials (denominators cleared per row)."""
    index: dict = {}
    for p in cols:
        for mono in p.terms:
            index.setdefault(mono, len(index))
    rows = [[Fraction(0)] * len(cols) for _ in index]
    for j, p in enumerate(cols):
        for mono, c in p.terms.items():
            rows[index[mono]][j] = c
    out = []
    for r in rows:
        den = 1
        for x in r:
            den = lcm(den, x.denominator)
        out.append([int(x * den) for x in r])
    return out


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------

def verify(pair: DarbouxPair, f: VectorField) -> bool:
    fd = f.polynomials()
    return (lie_derivative(pair.p, fd) - pair.cofactor * pair.p).is_zero()


def _solve_for_cofactor(c: Polynomial, template: list, lies: list) -> list:
    cols = [lies[j] - c * Polynomial({template[j]: 1}) for j in range(len(template))]
    rows = _rows_from_columns(cols)
    if not rows:
        return [Polynomial({t: 1}) for t in template]
    big = any(abs(x) >= 2**31 for r in rows for x in r)
    if not big and len(rows) >= len(template) and _full_rank_mod_p(np.array(rows, dtype=np.int64)):
        return []
    out = []
    for vec in integer_nullspace(rows, len(template)):
        out.append(Polynomial({template[j]: x for j, x in enumerate(vec) if x}))
    return out


def _sort_key(p: Polynomial):
    return (p.degree(), len(p), str(p))


def search(f: VectorField, pdeg: int, cofdeg: int, vars_=("g", "h", "e"),
           coeffs=range(-2, 3), maxterms: int = 2, cap: int = DEFAULT_CAP,
           workers: int | None = None) -> list:
    """Darboux pairs with deg p <= pdeg and cofactors from the template grid."""
    sub = f.restrict(vars_)
    fd = sub.polynomials()
    cofactors = enumerate_cofactors(cofdeg, coeffs, maxterms, vars_, cap)
    template = monomials_upto(vars_, pdeg)
    lies = [lie_derivative(Polynomial({t: 1}), fd) for t in template]

    def work(c):
        return c, _solve_for_cofactor(c, template, lies)

    workers = workers or _worker_count()
    if workers > 1 and len(cofactors) > 64:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(work, cofactors))
    else:
        results = [work(c) for c in cofactors]

    found: dict = {}
    for c, polys in results:  # cofactor order is deterministic
        for p in polys:
            if p.is_constant():
                continue
            p = p.monic()
            if p not in found:
                found[p] = DarbouxPair(p, c)
    pairs = _drop_products(list(found.values()))
    return sorted(pairs, key=lambda pr: (_sort_key(pr.p), _sort_key(pr.cofactor)))


def _drop_products(pairs: list) -> list:
    polys = {pr.p for pr in pairs}
    keep = []
    for pr in pairs:
        reducible = False
        for q in polys:
            if q == pr.p or q.degree() >= pr.p.degree():
                continue
            r = pr.p.try_divide(q)
            if r is not None and not r.is_constant() and r.monic() in polys:
                reducible = True
                break
        if not reducible:
            keep.append(pr)
    return keep


def _worker_count() -> int:
    env = os.environ.get("HYKEEP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


# ---------------------------------------------------------------------------
# first integrals
# ---------------------------------------------------------------------------

def first_integrals(pairs: list, f: VectorField | None = None) -> list:
    """Rational first integrals prod p_i^l_i with sum l_i c_i = 0.

    Factors enter in primitive integer form, so the pair (h*e + 1/2, 2*g*e)
    contributes 2*h*e + 1. With ``f`` given, the quotient-rule identity is
    checked for every result and failures are dropped.
    """
    pairs = [pr for pr in pairs if not pr.p.is_constant()]
    if not pairs:
        return []
    rows = _rows_from_columns([pr.cofactor for pr in pairs])
    if rows:
        basis = integer_nullspace(rows, len(pairs))
    else:
        basis = [[1 if i == j else 0 for i in range(len(pairs))] for j in range(len(pairs))]
    out = []
    for lam in basis:
        last = next(x for x in reversed(lam) if x)
        if last < 0:
            lam = [-x for x in lam]
        num, den = Polynomial.const(1), Polynomial.const(1)
        for pr, k in zip(pairs, lam):
            base = primitive(pr.p)
            if k > 0:
                num = num * base**k
            elif k < 0:
                den = den * base ** (-k)
        q = num.try_divide(den)
        if q is not None and q.is_constant():
            continue
        expr = PolyLeaf(num) if den == Polynomial.const(1) else Quotient(PolyLeaf(num), PolyLeaf(den))
        fi = FirstIntegral(num, den, tuple(pairs), tuple(lam), expr)
        if f is not None and not fi.identity_holds(f):
            continue
        out.append(fi)
    return out

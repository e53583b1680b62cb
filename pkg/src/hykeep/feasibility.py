"""Emptiness of conjunctions of sign constraints over a box.

A clause is a list of atoms ``q ⋈ 0``. The decision procedure is sound
for EMPTY (never claims emptiness of a non-empty set) and only reports
NONEMPTY with a point that satisfies every original atom in 128-bit
arithmetic. Stages:

1. rational forms are cleared of denominators with certified sign;
2. square roots of constants are eliminated by sign case splits;
3. coherence relations are eliminated by substitution: on the unit
   circle ``g = cos(phi), h = sin(phi)``, and ``e = 1/d`` when ``e*d = 1``;
4. constraints are scaled by positive monomials and rational content;
5. branch-and-bound over the remaining variables, with a linear
   relaxation over monomials (exact Fourier-Motzkin), box contraction
   from linear univariate constraints, monotonicity-sharpened enclosures,
   independent-component splitting, and an exact resolver for bearing
   angles at rational multiples of pi where constraints are tight.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple

import mpmath

from .expr import rational_form
from .interval import PI, TWO_PI, DivisionInterval, Interval, _down, _up
from .poly import Polynomial, var_rank
from .sets import Atom

__all__ = [
    "Box",
    "Budget",
    "Stats",
    "EMPTY",
    "NONEMPTY",
    "UNKNOWN",
    "decide_empty",
    "enclose",
    "sym_interval",
    "confirm_point",
    "DEFAULT_BOX",
]

EMPTY, NONEMPTY, UNKNOWN = "empty", "nonempty", "unknown"
EQ_THICKNESS = 1e-12
RESOLVE_WIDTH = 0.05
CONFIRM_TOL = mpmath.mpf(10) ** -30
FM_CAP = 600

_ONE = Polynomial.const(1)
_CIRCLE = Polynomial.parse("g^2 + h^2 - 1")
_RECIP = Polynomial.parse("e*d - 1")


# ---------------------------------------------------------------------------
# boxes, budgets, stats
# ---------------------------------------------------------------------------

class Box:
    """Axis-aligned box: variable name to closed float interval."""

    __slots__ = ("_b",)

    def __init__(self, bounds: Mapping[str, object]):
        b = {}
        for v, iv in bounds.items():
            if not isinstance(iv, Interval):
                lo, hi = iv
                iv = Interval(lo, hi)
            if not (math.isfinite(iv.lo) and math.isfinite(iv.hi)):
                raise ValueError(f"box bound for {v} is not finite")
            b[v] = iv
        self._b = b

    @classmethod
    def parse(cls, specs: Iterable[str], base: "Box | None" = None) -> "Box":
        """Parse ``k=lo:hi`` items; bounds may be expressions such as ``2*pi``."""
        from .certify import interval_eval
        from .expr import parse_expr

        out = dict(base._b) if base is not None else {}
        for s in specs:
            if "=" not in s or ":" not in s:
                raise ValueError(f"box item must be k=lo:hi, got {s!r}")
            k, rng = s.split("=", 1)
            lo_s, hi_s = rng.split(":", 1)
            lo = interval_eval(parse_expr(lo_s), Box({})).lo
            hi = interval_eval(parse_expr(hi_s), Box({})).hi
            out[k.strip()] = Interval(lo, hi)
        return cls(out)

    def __getitem__(self, v) -> Interval:
        return self._b[v]

    def get(self, v, default=None):
        return self._b.get(v, default)

    def __contains__(self, v):
        return v in self._b

    @property
    def variables(self) -> tuple:
        return tuple(sorted(self._b, key=var_rank))

    def items(self):
        return self._b.items()

    def with_(self, v, iv: Interval) -> "Box":
        b = dict(self._b)
        b[v] = iv
        return Box(b)

    def without(self, v) -> "Box":
        b = dict(self._b)
        b.pop(v, None)
        return Box(b)

    def restrict(self, vars_) -> "Box":
        return Box({v: self._b[v] for v in vars_ if v in self._b})

    def midpoint(self) -> dict:
        return {v: iv.mid for v, iv in self._b.items()}

    def contains_point(self, point: Mapping[str, float]) -> bool:
        return all(v not in point or iv.lo <= float(point[v]) <= iv.hi for v, iv in self._b.items())

    def to_json(self) -> dict:
        return {v: [iv.lo, iv.hi] for v, iv in sorted(self._b.items(), key=lambda it: var_rank(it[0]))}

    def __eq__(self, other):
        return isinstance(other, Box) and self._b == other._b

    def __repr__(self):
        inner = ", ".join(f"{v}=[{iv.lo:g}, {iv.hi:g}]" for v, iv in self._b.items())
        return f"Box({inner})"


DEFAULT_BOX = Box({
    "d": (1e-3, 1e2),
    "e": (1e-2, 1e3),
    "g": (-1.0, 1.0),
    "h": (-1.0, 1.0),
    "phi": (0.0, TWO_PI.hi),
})


@dataclass
class Budget:
    max_depth: int = 40
    max_boxes: int = 10**6
    min_rel_width: float = 1e-9
    time_limit: float | None = None

    def scaled(self, k: int) -> "Budget":
        return Budget(self.max_depth * k if k > 1 else self.max_depth, self.max_boxes * k,
                      self.min_rel_width / k, None if self.time_limit is None else self.time_limit * k)


@dataclass
class Stats:
    boxes: int = 0
    max_depth: int = 0
    wall_time: float = 0.0
    fm_refutations: int = 0
    resolver_points: int = 0
    budget_hit: bool = False

    def merge(self, other: "Stats"):
        self.boxes += other.boxes
        self.max_depth = max(self.max_depth, other.max_depth)
        self.wall_time += other.wall_time
        self.fm_refutations += other.fm_refutations
        self.resolver_points += other.resolver_points
        self.budget_hit = self.budget_hit or other.budget_hit

    def to_json(self) -> dict:
        return {
            "boxes": self.boxes,
            "max_depth": self.max_depth,
            "wall_time": round(self.wall_time, 6),
            "fm_refutations": self.fm_refutations,
            "resolver_points": self.resolver_points,
            "budget_hit": self.budget_hit,
        }


class _Ctx:
    def __init__(self, budget: Budget, stats: Stats):
        self.budget = budget
        self.stats = stats
        self.t0 = time.perf_counter()

    def exhausted(self) -> bool:
        if self.stats.boxes >= self.budget.max_boxes:
            return True
        if self.budget.time_limit is not None and time.perf_counter() - self.t0 > self.budget.time_limit:
            return True
        return False


class Con(NamedTuple):
    poly: Polynomial
    rel: str  # "<", "<=", "="


# ---------------------------------------------------------------------------
# enclosures of polynomials over extended symbols
# ---------------------------------------------------------------------------

def _sqrt_interval(r: Fraction) -> Interval:
    lo = Interval.from_fraction(r)
    return Interval(_down(math.sqrt(lo.lo)), _up(math.sqrt(lo.hi)))


def sym_interval(sym: str, box: Box) -> Interval:
    if sym == "pi":
        return PI
    if sym.startswith("sqrt("):
        return _sqrt_interval(Fraction(sym[5:-1]))
    if sym.startswith("cos("):
        return box[sym[4:-1]].cos()
    if sym.startswith("sin("):
        return box[sym[4:-1]].sin()
    return box[sym]


_COMPILED: dict = {}


def _compile(p: Polynomial):
    c = _COMPILED.get(p)
    if c is None:
        c = [(Interval.from_fraction(coef), m) for m, coef in p.terms.items()]
        if len(_COMPILED) > 200_000:
            _COMPILED.clear()
        _COMPILED[p] = c
    return c


def enclose(p: Polynomial, box: Box, cache: dict | None = None) -> Interval:
    """Natural interval extension of a polynomial over extended symbols."""
    if cache is None:
        cache = {}
    total = Interval(0.0)
    for coef, m in _compile(p):
        term = coef
        for v, k in m:
            iv = cache.get(v)
            if iv is None:
                iv = sym_interval(v, box)
                cache[v] = iv
            term = term * (iv**k if k > 1 else iv)
        total = total + term
    return total


def base_vars(p: Polynomial) -> set:
    out = set()
    for v in p.variables:
        if v == "pi" or v.startswith("sqrt("):
            continue
        if v.startswith("cos(") or v.startswith("sin("):
            out.add(v[4:-1])
        else:
            out.add(v)
    return out


def reduce_trig(p: Polynomial) -> Polynomial:
    """Rewrite sin(v)^2 as 1 - cos(v)^2 so representations are canonical."""
    if not any(v.startswith("sin(") and p.degree(v) >= 2 for v in p.variables):
        return p
    out = Polynomial()
    for m, c in p.terms.items():
        term = Polynomial.const(c)
        for v, k in m:
            if v.startswith("sin(") and k >= 2:
                cv = "cos(" + v[4:]
                term = term * (1 - Polynomial.var(cv, 2)) ** (k // 2)
                if k % 2:
                    term = term * Polynomial.var(v)
            else:
                term = term * Polynomial.var(v, k)
        out = out + term
    return out


_DERIV: dict = {}


def dpoly(p: Polynomial, v: str) -> Polynomial:
    key = (p, v)
    r = _DERIV.get(key)
    if r is not None:
        return r
    out = p.diff(v)
    cs, sn = f"cos({v})", f"sin({v})"
    if cs in p.variables:
        out = out - p.diff(cs) * Polynomial.var(sn)
    if sn in p.variables:
        out = out + p.diff(sn) * Polynomial.var(cs)
    out = reduce_trig(out)
    if len(_DERIV) > 200_000:
        _DERIV.clear()
    _DERIV[key] = out
    return out


def sharp_enclose(p: Polynomial, box: Box) -> Interval:
    """Natural enclosure sharpened by monotonicity in each variable."""
    nat = enclose(p, box)
    bv = [v for v in base_vars(p) if v in box and box[v].width > 0]
    if not bv:
        return nat
    lo_box, hi_box = dict(box.items()), dict(box.items())
    moved = False
    for v in bv:
        der = enclose(dpoly(p, v), box)
        iv = box[v]
        if der.lo >= 0:
            lo_box[v], hi_box[v] = Interval(iv.lo), Interval(iv.hi)
            moved = True
        elif der.hi <= 0:
            lo_box[v], hi_box[v] = Interval(iv.hi), Interval(iv.lo)
            moved = True
    if not moved:
        return nat
    lo = max(nat.lo, enclose(p, Box(lo_box)).lo)
    hi = min(nat.hi, enclose(p, Box(hi_box)).hi)
    if lo > hi:  # rounding artefact at a single point; keep the natural one
        return nat
    return Interval(lo, hi)


def _decide(c: Con, box: Box):
    """True if c holds on all of box, False if nowhere, None if unknown."""
    e = enclose(c.poly, box)
    r = _decide_iv(c.rel, e)
    if r is not None:
        return r
    e = sharp_enclose(c.poly, box)
    return _decide_iv(c.rel, e)


def _decide_iv(rel, e: Interval):
    if rel == "<":
        if e.hi < 0:
            return True
        if e.lo >= 0:
            return False
    elif rel == "<=":
        if e.hi <= 0:
            return True
        if e.lo > 0:
            return False
    else:
        if e.lo > EQ_THICKNESS or e.hi < -EQ_THICKNESS:
            return False
    return None


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def _neg_rel(rel):
    return {"<": "<=", "<=": "<"}[rel]


def _const_truth(c: Con) -> bool:
    v = c.poly.constant_value()
    return v < 0 if c.rel == "<" else (v <= 0 if c.rel == "<=" else v == 0)


def _is_constant_symbolic(p: Polynomial) -> bool:
    return all(v == "pi" or v.startswith("sqrt(") for v in p.variables)


def _sqrt_split(c: Con) -> list:
    """DNF over constraints free of square-root symbols."""
    syms = [v for v in c.poly.variables if v.startswith("sqrt(")]
    if not syms:
        return [[c]]
    s = syms[0]
    r = Fraction(s[5:-1])
    sv = Polynomial.var(s)
    A = Polynomial({m: k for m, k in c.poly.terms.items() if s not in dict(m)})
    B = (c.poly - A).try_divide(sv)
    from .expr import _reduce_sqrt

    q = _reduce_sqrt(A * A - B * B * r)
    if c.rel == "<":
        alts = [
            [Con(A, "<"), Con(B, "<=")],
            [Con(A, "<="), Con(B, "<")],
            [Con(A, "<"), Con(-B, "<"), Con(-q, "<")],
            [Con(-A, "<"), Con(B, "<"), Con(q, "<")],
        ]
    elif c.rel == "<=":
        alts = [
            [Con(A, "<="), Con(B, "<=")],
            [Con(A, "<="), Con(-B, "<"), Con(-q, "<=")],
            [Con(-A, "<"), Con(B, "<"), Con(q, "<=")],
        ]
    else:
        alts = [
            [Con(A, "="), Con(B, "=")],
            [Con(A, "<"), Con(-B, "<"), Con(q, "=")],
            [Con(-A, "<"), Con(B, "<"), Con(q, "=")],
        ]
    out = []
    for alt in alts:
        clauses = [[]]
        for con in alt:
            sub = _sqrt_split(con)
            clauses = [a + b for a in clauses for b in sub]
        out.extend(clauses)
    return out


def _positive_vars(cons, box: Box) -> set:
    pos = {"pi"}
    for v, iv in box.items():
        if iv.lo > 0:
            pos.add(v)
    for c in cons:
        # -v < 0
        if c.rel == "<" and len(c.poly) == 1:
            (m, k), = c.poly.terms.items()
            if k < 0 and len(m) == 1 and m[0][1] == 1:
                pos.add(m[0][0])
    return pos


def _canonical(c: Con, pos: set) -> Con:
    p = c.poly
    if p.is_zero():
        return c
    mc = p.monomial_content()
    if len(p) == 1 and sum(k for _, k in mc) == 1:
        mc = ()  # a positivity atom must not justify itself
    drop = tuple((v, k) for v, k in mc if v in pos)
    if drop:
        p = p.try_divide(Polynomial({drop: 1}))
    cont = p.content()
    if cont != 1 and cont != 0:
        p = p * (1 / cont)
    return Con(p, c.rel)


def _simplify(cons, box: Box):
    """Canonicalize, decide constants. Returns None when a constraint is false."""
    pos = _positive_vars(cons, box)
    out = []
    seen = set()
    for c in cons:
        c = _canonical(c, pos)
        if c.poly.is_constant():
            if not _const_truth(c):
                return None
            continue
        if _is_constant_symbolic(c.poly):
            e = enclose(c.poly, box)
            r = _decide_iv(c.rel, e)
            if r is False:
                return None
            if r is True:
                continue
        if c in seen:
            continue
        seen.add(c)
        out.append(c)
    return out


def normalize(cons, box: Box) -> list:
    """Square-root elimination plus canonical scaling; a DNF of clauses."""
    clauses = [[]]
    for c in cons:
        sub = _sqrt_split(c)
        clauses = [a + b for a in clauses for b in sub]
    out = []
    for cl in clauses:
        s = _simplify(cl, box)
        if s is not None:
            out.append(s)
    return out


# ---------------------------------------------------------------------------
# coherence elimination
# ---------------------------------------------------------------------------

@dataclass
class _Reduction:
    trig: bool = False
    recip: bool = False
    free_phi: bool = False


def _matches(p: Polynomial, target: Polynomial) -> bool:
    if p.is_zero():
        return False
    q = p * (1 / p.leading_coefficient())
    return q == target * (1 / target.leading_coefficient())


def _eliminate_coherence(cons, box: Box):
    """Substitute the coherence relations. Returns (cons, box, reduction)."""
    red = _Reduction()
    vars_ = set()
    for c in cons:
        vars_ |= set(c.poly.variables)
    has_circle = any(c.rel == "=" and _matches(c.poly, _CIRCLE) for c in cons)
    trig = has_circle or ("phi" in vars_ and ("g" in vars_ or "h" in vars_))
    if trig and ("g" in vars_ or "h" in vars_):
        red.trig = True
        sub = {"g": Polynomial.var("cos(phi)"), "h": Polynomial.var("sin(phi)")}
        extra = []
        for v, sym in (("g", "cos(phi)"), ("h", "sin(phi)")):
            iv = box.get(v)
            if iv is not None and (iv.lo > -1 or iv.hi < 1):
                s = Polynomial.var(sym)
                extra.append(Con(Polynomial.const(Fraction(iv.lo)) - s, "<="))
                extra.append(Con(s - Polynomial.const(Fraction(iv.hi)), "<="))
        new = []
        for c in cons:
            if c.rel == "=" and _matches(c.poly, _CIRCLE):
                continue
            new.append(Con(reduce_trig(c.poly.subs(sub)), c.rel))
        cons = new + extra
        if "phi" not in vars_:
            red.free_phi = True
            box = box.with_("phi", Interval(0.0, TWO_PI.hi))
        elif "phi" not in box:
            box = box.with_("phi", Interval(0.0, TWO_PI.hi))
        box = box.without("g").without("h")
    has_recip = any(c.rel == "=" and _matches(c.poly, _RECIP) for c in cons)
    if has_recip:
        red.recip = True
        d_pos = ("d" in box and box["d"].lo > 0) or "d" in _positive_vars(cons, box)
        new = []
        for c in cons:
            if c.rel == "=" and _matches(c.poly, _RECIP):
                continue
            k = c.poly.degree("e")
            if k <= 0:
                new.append(c)
                continue
            kk = k if d_pos or k % 2 == 0 else k + 1
            out = Polynomial()
            for m, coef in c.poly.terms.items():
                md = dict(m)
                j = md.pop("e", 0)
                md["d"] = md.get("d", 0) + (kk - j)
                if md["d"] == 0:
                    del md["d"]
                out = out + Polynomial({tuple(sorted(md.items(), key=lambda it: var_rank(it[0]))): coef})
            new.append(Con(out, c.rel))
        cons = new
        if "e" in box:
            ei = box["e"]
            if "d" in box and ei.lo > 0:
                recip = Interval(1.0) / ei
                di = box["d"].intersect(recip)
                if di is None:
                    return None, box, red
                box = box.with_("d", di)
            box = box.without("e")
    return cons, box, red


# ---------------------------------------------------------------------------
# linear relaxation: Fourier-Motzkin over monomials
# ---------------------------------------------------------------------------

def _fm_rows(cons, box: Box):
    rows = []
    monos = set()
    for c in cons:
        lin = {m: k for m, k in c.poly.terms.items() if m != ()}
        k0 = c.poly.constant_value()
        monos |= set(lin)
        if c.rel == "=":
            rows.append((lin, k0, False))
            rows.append(({m: -k for m, k in lin.items()}, -k0, False))
        else:
            rows.append((lin, k0, c.rel == "<"))
    cache: dict = {}
    for m in monos:
        iv = enclose(Polynomial({m: 1}), box, cache)
        rows.append(({m: Fraction(1)}, -Fraction(iv.hi), False))
        rows.append(({m: Fraction(-1)}, Fraction(iv.lo), False))
    return rows, monos


def _fm_norm(lin, k0, strict):
    if not lin:
        return None
    scale = max(abs(x) for x in lin.values())
    return (frozenset((m, x / scale) for m, x in lin.items()), k0 / scale, strict)


def fm_infeasible(cons, box: Box, cap: int = FM_CAP) -> bool:
    """True if the monomial linear relaxation is infeasible (exact)."""
    rows, monos = _fm_rows(cons, box)
    work = []
    seen = set()
    for lin, k0, st in rows:
        if not lin:
            if (st and k0 >= 0) or (not st and k0 > 0):
                return True
            continue
        key = _fm_norm(lin, k0, st)
        if key in seen:
            continue
        seen.add(key)
        work.append((lin, k0, st))
    remaining = set(monos)
    while remaining:
        best, best_cost = None, None
        for m in remaining:
            npos = sum(1 for lin, _, _ in work if lin.get(m, 0) > 0)
            nneg = sum(1 for lin, _, _ in work if lin.get(m, 0) < 0)
            cost = npos * nneg - npos - nneg
            if best_cost is None or cost < best_cost or (cost == best_cost and str(m) < str(best)):
                best, best_cost = m, cost
        m = best
        remaining.discard(m)
        pos = [r for r in work if r[0].get(m, 0) > 0]
        neg = [r for r in work if r[0].get(m, 0) < 0]
        rest = [r for r in work if r[0].get(m, 0) == 0]
        if len(rest) + len(pos) * len(neg) > cap:
            return False
        new = list(rest)
        seen = {_fm_norm(*r) for r in rest}
        for lp, kp, sp in pos:
            a = lp[m]
            for ln, kn, sn in neg:
                b = -ln[m]
                lin = {}
                for mm in set(lp) | set(ln):
                    if mm == m:
                        continue
                    x = b * lp.get(mm, 0) + a * ln.get(mm, 0)
                    if x:
                        lin[mm] = x
                k0 = b * kp + a * kn
                st = sp or sn
                if not lin:
                    if (st and k0 >= 0) or (not st and k0 > 0):
                        return True
                    continue
                key = _fm_norm(lin, k0, st)
                if key in seen:
                    continue
                seen.add(key)
                new.append((lin, k0, st))
        work = new
    return False


# ---------------------------------------------------------------------------
# contraction
# ---------------------------------------------------------------------------

def _contract(cons, box: Box):
    """Tighten bounds from constraints linear in one box variable."""
    b = box
    for c in cons:
        lin_var = None
        a = None
        rest = {}
        ok = True
        for m, k in c.poly.terms.items():
            if len(m) == 1 and m[0][1] == 1 and m[0][0] in b and m[0][0] != "pi":
                if lin_var is None or lin_var == m[0][0]:
                    lin_var, a = m[0][0], k
                    continue
                ok = False
                break
            if all(v == "pi" for v, _ in m):
                rest[m] = k
            else:
                ok = False
                break
        if not ok or lin_var is None:
            continue
        bound = -enclose(Polynomial(rest), b) / Interval.from_fraction(a)
        iv = b[lin_var]
        lo, hi = iv.lo, iv.hi
        if c.rel == "=":
            lo, hi = max(lo, bound.lo), min(hi, bound.hi)
        elif a > 0:
            hi = min(hi, bound.hi)
        else:
            lo = max(lo, bound.lo)
        if lo > hi:
            return None
        if lo != iv.lo or hi != iv.hi:
            b = b.with_(lin_var, Interval(lo, hi))
    return b


# ---------------------------------------------------------------------------
# exact values at rational multiples of pi
# ---------------------------------------------------------------------------

_HALF = Fraction(1, 2)
_COS12 = {
    0: Polynomial.const(1),
    2: Polynomial({(("sqrt(3)", 1),): _HALF}),
    3: Polynomial({(("sqrt(2)", 1),): _HALF}),
    4: Polynomial.const(_HALF),
    6: Polynomial(),
}


def _cos12(j: int):
    j %= 24
    if j > 12:
        j = 24 - j
    if j > 6:
        v = _cos12(12 - j)
        return None if v is None else -v
    return _COS12.get(j)


def exact_trig(q: Fraction):
    """(cos, sin) of q*pi as polynomials in sqrt symbols, or None."""
    j = q * 12
    if j.denominator != 1:
        return None
    j = int(j)
    c, s = _cos12(j), _cos12(6 - j)
    if c is None or s is None:
        return None
    return c, s


_CANDIDATES = sorted({Fraction(k, n) for n in (1, 2, 3, 4, 6) for k in range(-2 * n, 4 * n + 1)})


def _candidate_in(iv: Interval):
    found = []
    for q in _CANDIDATES:
        r = PI * Interval.from_fraction(q)
        if r.hi >= iv.lo and r.lo <= iv.hi:
            found.append(q)
    return found


def _substitute_phi(p: Polynomial, q: Fraction) -> Polynomial:
    from .expr import _reduce_sqrt

    c, s = exact_trig(q)
    sub = {"phi": Polynomial.var("pi") * q, "cos(phi)": c, "sin(phi)": s}
    return _reduce_sqrt(p.subs(sub))


def _phi_only(p: Polynomial) -> bool:
    return base_vars(p) <= {"phi"}


# ---------------------------------------------------------------------------
# branch and bound
# ---------------------------------------------------------------------------

class _Outcome(NamedTuple):
    status: str
    witness: dict | None = None


def _components(cons):
    parent: dict = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    groups = []
    for c in cons:
        vs = sorted(base_vars(c.poly))
        for v in vs:
            parent.setdefault(v, v)
        for v in vs[1:]:
            ra, rb = find(vs[0]), find(v)
            if ra != rb:
                parent[rb] = ra
    buckets: dict = {}
    for c in cons:
        vs = base_vars(c.poly)
        key = find(next(iter(vs))) if vs else None
        buckets.setdefault(key, []).append(c)
    return list(buckets.values())


def _holds_at(c: Con, point: Mapping[str, object], mode: str) -> bool:
    from .expr import ext_symbol_value

    vals = {}
    for v in c.poly.variables:
        vals[v] = ext_symbol_value(v, point, mode)
    if mode == "mp":
        with mpmath.workprec(128):
            x = mpmath.mpf(0)
            for m, k in c.poly.terms.items():
                t = mpmath.mpf(k.numerator) / k.denominator
                for v, e in m:
                    t *= mpmath.mpf(vals[v]) ** e
                x += t
            tol = CONFIRM_TOL
            if c.rel == "<":
                return x < -tol
            if c.rel == "<=":
                return x <= tol
            return abs(x) <= tol
    x = 0.0
    for m, k in c.poly.terms.items():
        t = float(k)
        for v, e in m:
            t *= float(vals[v]) ** e
        x += t
    if c.rel == "<":
        return x < -1e-12
    if c.rel == "<=":
        return x <= -1e-12
    return False


def _probe(cons, box: Box):
    if any(c.rel == "=" for c in cons):
        return None
    pt = box.midpoint()
    if all(_holds_at(c, pt, "float") for c in cons) and all(_holds_at(c, pt, "mp") for c in cons):
        return pt
    return None


def _split_var(cons, box: Box, root: Box):
    best, best_w = None, -1.0
    vs = set()
    for c in cons:
        vs |= base_vars(c.poly)
    for v in sorted(vs, key=var_rank):
        if v not in box:
            continue
        iv = box[v]
        r = root[v].width if v in root else iv.width
        w = iv.width / r if r > 0 else 0.0
        if w > best_w:
            best, best_w = v, w
    return best, best_w


def _solve(cons, box: Box, ctx: _Ctx, root: Box, depth0: int = 0, resolved=frozenset()) -> _Outcome:
    stack = [(box, list(cons), depth0)]
    unknown = False
    first = True
    while stack:
        B, C, dep = stack.pop()
        if ctx.exhausted():
            ctx.stats.budget_hit = True
            return _Outcome(UNKNOWN)
        ctx.stats.boxes += 1
        ctx.stats.max_depth = max(ctx.stats.max_depth, dep)
        B = _contract(C, B)
        if B is None:
            continue
        live = []
        dead = False
        for c in C:
            r = _decide(c, B)
            if r is False:
                dead = True
                break
            if r is None:
                live.append(c)
        if dead:
            continue
        if not live:
            return _Outcome(NONEMPTY, B.midpoint())
        comps = _components(live)
        if len(comps) > 1:
            results = []
            for comp in comps:
                vs = set()
                for c in comp:
                    vs |= base_vars(c.poly)
                sub = _solve(comp, B.restrict(vs), ctx, root, dep, resolved)
                results.append(sub)
                if sub.status == EMPTY:
                    break
            if any(r.status == EMPTY for r in results):
                continue
            if all(r.status == NONEMPTY for r in results):
                w = B.midpoint()
                for r in results:
                    w.update(r.witness)
                return _Outcome(NONEMPTY, w)
            unknown = True
            continue
        if (first or dep % 6 == 0) and fm_infeasible(live, B):
            ctx.stats.fm_refutations += 1
            continue
        first = False
        w = _probe(live, B)
        if w is not None:
            return _Outcome(NONEMPTY, w)
        if "phi" in B and B["phi"].width < RESOLVE_WIDTH:
            res = _resolve(live, B, ctx, root, dep, resolved)
            if res is not None:
                if res.status == NONEMPTY:
                    return res
                if res.status == UNKNOWN:
                    unknown = True
                continue
        v, rel_w = _split_var(live, B, root)
        if v is None or dep >= ctx.budget.max_depth or rel_w < ctx.budget.min_rel_width:
            unknown = True
            continue
        b1, b2 = B[v].split()
        stack.append((B.with_(v, b2), live, dep + 1))
        stack.append((B.with_(v, b1), live, dep + 1))
    return _Outcome(UNKNOWN if unknown else EMPTY)


def _resolve(cons, box: Box, ctx: _Ctx, root: Box, dep: int, resolved) -> _Outcome | None:
    """Split the bearing interval at an exact tight angle, if one applies."""
    iv = box["phi"]
    cands = [q for q in _candidate_in(iv) if q not in resolved]
    if len(cands) != 1:
        return None
    q = cands[0]
    tight = []
    for c in cons:
        if _phi_only(c.poly) and "phi" in base_vars(c.poly):
            val = _substitute_phi(c.poly, q)
            if val.is_zero():
                tight.append(c)
    if not tight:
        return None
    signs = {}
    for c in tight:
        der = enclose(dpoly(c.poly, "phi"), box)
        if der.lo > 0:
            signs[c] = 1
        elif der.hi < 0:
            signs[c] = -1
        else:
            return None
    ctx.stats.resolver_points += 1
    r_iv = PI * Interval.from_fraction(q)
    outcomes = []
    # left piece [lo, r): value has sign -s; right piece (r, hi]: sign s
    for side in (-1, 1):
        if side < 0:
            if iv.lo > r_iv.hi:
                continue
            piece = Interval(iv.lo, min(iv.hi, r_iv.hi))
        else:
            if iv.hi < r_iv.lo:
                continue
            piece = Interval(max(iv.lo, r_iv.lo), iv.hi)
        rest = []
        dead = False
        for c in cons:
            if c in signs:
                sgn = side * signs[c]  # sign of the constraint polynomial on the piece
                holds = sgn < 0 if c.rel in ("<", "<=") else False
                if not holds:
                    dead = True
                    break
            else:
                rest.append(c)
        if dead:
            continue
        if not rest:
            w = box.with_("phi", piece).midpoint()
            outcomes.append(_Outcome(NONEMPTY, w))
            break
        outcomes.append(_solve(rest, box.with_("phi", piece), ctx, root, dep + 1, resolved | {q}))
        if outcomes[-1].status == NONEMPTY:
            break
    if not outcomes or outcomes[-1].status != NONEMPTY:
        # the exact point phi = q*pi
        subbed = [Con(_substitute_phi(c.poly, q), c.rel) for c in cons]
        pbox = box.without("phi")
        point_res = _solve_dnf(normalize(subbed, pbox), pbox, ctx, root, dep + 1)
        if point_res.status == NONEMPTY:
            w = dict(point_res.witness)
            w["phi"] = _ExactAngle(q)
            point_res = _Outcome(NONEMPTY, w)
        outcomes.append(point_res)
    if any(o.status == NONEMPTY for o in outcomes):
        return next(o for o in outcomes if o.status == NONEMPTY)
    if any(o.status == UNKNOWN for o in outcomes):
        return _Outcome(UNKNOWN)
    return _Outcome(EMPTY)


class _ExactAngle(float):
    """A bearing equal to q*pi exactly; evaluates as a float by default."""

    def __new__(cls, q: Fraction):
        obj = super().__new__(cls, float(q) * math.pi)
        obj.q = q
        return obj

    def mp(self):
        return mpmath.mpf(self.q.numerator) / self.q.denominator * mpmath.pi


def _solve_dnf(clauses, box: Box, ctx: _Ctx, root: Box, dep: int = 0) -> _Outcome:
    unknown = False
    for cl in clauses:
        if not cl:
            return _Outcome(NONEMPTY, box.midpoint())
        if any(v not in box for c in cl for v in base_vars(c.poly)):
            missing = sorted({v for c in cl for v in base_vars(c.poly)} - set(box.variables))
            raise KeyError(f"box does not bound {missing}")
        r = _solve(cl, box, ctx, root, dep)
        if r.status == NONEMPTY:
            return r
        if r.status == UNKNOWN:
            unknown = True
    return _Outcome(UNKNOWN if unknown else EMPTY)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _atom_cons(a: Atom, box: Box) -> list:
    """Denominator-free constraints for one atom, as a DNF."""
    n, d = rational_form(a.expr)
    if d.is_constant():
        k = d.constant_value()
        return [[Con(n if k > 0 else -n, a.rel)]]
    sign = 0
    if all(v in box or v == "pi" or v.startswith("sqrt(") or v[4:-1] in box for v in d.variables):
        try:
            iv = enclose(d, box)
            sign = 1 if iv.lo > 0 else (-1 if iv.hi < 0 else 0)
        except KeyError:
            sign = 0
    if sign:
        return [[Con(n if sign > 0 else -n, a.rel)]]
    return [[Con(-d, "<"), Con(n, a.rel)], [Con(d, "<"), Con(-n, a.rel)]]


def confirm_point(atoms, point: Mapping[str, object]) -> bool:
    """All atoms hold at point in 128-bit arithmetic (equalities to 1e-30)."""
    with mpmath.workprec(128):
        mp_point = {v: x.mp() if isinstance(x, _ExactAngle) else x for v, x in point.items()}
        for a in atoms:
            try:
                val = a.expr.evaluate(mp_point, "mp")
            except (KeyError, ZeroDivisionError):
                return False
            if a.rel == "<" and not val < -CONFIRM_TOL:
                return False
            if a.rel == "<=" and not val <= CONFIRM_TOL:
                return False
            if a.rel == "=" and not abs(val) <= CONFIRM_TOL:
                return False
    return True


def _lift_witness(w: dict, red: _Reduction, box: Box, atoms) -> dict:
    pt = {}
    for v, iv in box.items():
        pt[v] = iv.mid
    pt.update(w)
    if red.trig:
        phi = pt["phi"]
        if isinstance(phi, _ExactAngle):
            pt["g"] = float(mpmath.cos(phi.mp()))
            pt["h"] = float(mpmath.sin(phi.mp()))
        else:
            pt["g"], pt["h"] = math.cos(phi), math.sin(phi)
    if red.recip and "d" in pt:
        pt["e"] = 1.0 / float(pt["d"])
    return pt


def _mp_lift(pt: dict, red: _Reduction) -> dict:
    out = {}
    with mpmath.workprec(128):
        for v, x in pt.items():
            out[v] = x.mp() if isinstance(x, _ExactAngle) else mpmath.mpf(x)
        if red.trig:
            out["g"], out["h"] = mpmath.cos(out["phi"]), mpmath.sin(out["phi"])
        if red.recip and "d" in out:
            out["e"] = 1 / out["d"]
    return out


def decide_empty(clauses, box: Box, budget: Budget | None = None, stats: Stats | None = None):
    """Decide emptiness of a DNF (list of atom lists) within box.

    Returns ``(status, witness)``; the witness maps variables to floats.
    """
    budget = budget or Budget()
    stats = stats if stats is not None else Stats()
    ctx = _Ctx(budget, stats)
    t0 = time.perf_counter()
    unknown = False
    try:
        for atoms in clauses:
            res = _decide_clause(atoms, box, ctx)
            if res.status == NONEMPTY:
                return NONEMPTY, res.witness
            if res.status == UNKNOWN:
                unknown = True
        return (UNKNOWN if unknown else EMPTY), None
    finally:
        stats.wall_time += time.perf_counter() - t0


def _decide_clause(atoms, box: Box, ctx: _Ctx) -> _Outcome:
    if not atoms:
        return _Outcome(NONEMPTY, box.midpoint())
    dnf = [[]]
    for a in atoms:
        sub = _atom_cons(a, box)
        dnf = [x + y for x in dnf for y in sub]
    unknown = False
    for cons in dnf:
        clauses = normalize(cons, box)
        for cl in clauses:
            red_cons, rbox, red = _eliminate_coherence(cl, box)
            if red_cons is None:
                continue
            for cl2 in normalize(red_cons, rbox):
                if not cl2:
                    w = rbox.midpoint()
                    res = _Outcome(NONEMPTY, w)
                else:
                    missing = {v for c in cl2 for v in base_vars(c.poly)} - set(rbox.variables)
                    if missing:
                        raise KeyError(f"box does not bound {sorted(missing)}")
                    res = _solve(cl2, rbox, ctx, rbox)
                if res.status == NONEMPTY:
                    pt = _lift_witness(res.witness, red, box, atoms)
                    mp_pt = _mp_lift(pt, red)
                    if confirm_point(atoms, mp_pt):
                        clean = {v: float(x) for v, x in pt.items()}
                        return _Outcome(NONEMPTY, clean)
                    unknown = True
                elif res.status == UNKNOWN:
                    unknown = True
    return _Outcome(UNKNOWN if unknown else EMPTY)

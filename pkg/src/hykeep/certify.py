"""Certified sign, inclusion and invariance checks.

Verdicts are three-valued. ``Proved`` is backed by exact symbolic identities
or by outward-rounded interval arithmetic; ``Disproved`` carries a witness
point confirmed in 128-bit arithmetic; everything else is ``Undetermined``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .dynamics import COHERENCE, Mode, VectorField
from .expr import (
    Cos, Expr, Neg, PiConst, PolyLeaf, Product, Quotient, Sin, SqrtConst, Sum,
    expr_lie, rational_form, to_expr,
)
from .feasibility import (
    DEFAULT_BOX, EMPTY, NONEMPTY, UNKNOWN, Box, Budget, Stats, decide_empty,
)
from .interval import PI, DivisionInterval, Interval, _down, _up
from .poly import Polynomial
from .sets import TRUE, Atom, SemialgSet, atom, clause_set, parse_set

__all__ = [
    "Box",
    "Budget",
    "Certificate",
    "Claim",
    "PROVED",
    "DISPROVED",
    "UNDETERMINED",
    "DEFAULT_BOX",
    "DivisionInterval",
    "interval_eval",
    "sign_certify",
    "contains",
    "di_check",
    "invariance_check",
    "darboux_invariance",
    "reduce_coherent",
]

PROVED, DISPROVED, UNDETERMINED = "Proved", "Disproved", "Undetermined"


@dataclass
class Certificate:
    claim: str
    verdict: str
    box: Box | None = None
    witness: dict | None = None
    stats: Stats = field(default_factory=Stats)
    method: str = "interval"
    premises: list = field(default_factory=list)
    note: str = ""

    @property
    def proved(self) -> bool:
        return self.verdict == PROVED

    def to_json(self) -> dict:
        out = {
            "claim": self.claim,
            "box": self.box.to_json() if self.box is not None else None,
            "verdict": self.verdict,
            "method": self.method,
            "stats": self.stats.to_json(),
        }
        if self.witness is not None:
            out["witness"] = {k: float(v) for k, v in sorted(self.witness.items())}
        if self.premises:
            out["premises"] = [p.to_json() for p in self.premises]
        if self.note:
            out["note"] = self.note
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def __str__(self):
        w = f" witness={self.witness}" if self.witness else ""
        return f"{self.verdict}: {self.claim}{w}"


# ---------------------------------------------------------------------------
# interval extension
# ---------------------------------------------------------------------------

def _sqrt_iv(r: Fraction) -> Interval:
    x = Interval.from_fraction(r)
    return Interval(_down(math.sqrt(x.lo)), _up(math.sqrt(x.hi)))


def _poly_iv(p: Polynomial, box: Box) -> Interval:
    total = Interval(0.0)
    for m, c in p.terms.items():
        t = Interval.from_fraction(c)
        for v, k in m:
            if v not in box:
                raise KeyError(f"box does not bound {v}")
            iv = box[v]
            t = t * (iv**k if k > 1 else iv)
        total = total + t
    return total


def interval_eval(x, box: Box) -> Interval:
    """Natural interval extension of an expression over a box.

    Evaluates the expression tree as written, so the enclosure is isotone in
    the box and tight for factored forms. Repeated identical factors are
    evaluated as powers.
    """
    x = to_expr(x) if not isinstance(x, Expr) else x
    if isinstance(x, PolyLeaf):
        return _poly_iv(x.poly, box)
    if isinstance(x, Sum):
        total = Interval(0.0)
        for a in x.args:
            total = total + interval_eval(a, box)
        return total
    if isinstance(x, Product):
        groups: dict = {}
        order = []
        for a in x.args:
            if a not in groups:
                groups[a] = 0
                order.append(a)
            groups[a] += 1
        out = Interval(1.0)
        for a in order:
            iv = interval_eval(a, box)
            out = out * (iv ** groups[a] if groups[a] > 1 else iv)
        return out
    if isinstance(x, Neg):
        return -interval_eval(x.arg, box)
    if isinstance(x, Quotient):
        den = interval_eval(x.den, box)
        if den.contains_zero():
            raise DivisionInterval(f"enclosure of {x.den} is {den!r}, contains 0")
        return interval_eval(x.num, box) / den
    if isinstance(x, Cos):
        return box[x.var].cos()
    if isinstance(x, Sin):
        return box[x.var].sin()
    if isinstance(x, PiConst):
        return PI * Interval.from_fraction(x.coef)
    if isinstance(x, SqrtConst):
        return _sqrt_iv(x.radicand)
    raise TypeError(f"unknown expression node {type(x).__name__}")


# ---------------------------------------------------------------------------
# claims and emptiness-based checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Claim:
    """Sign claim on an expression: ``le``, ``lt``, ``ge`` or ``gt``.

    ``lt`` with a positive margin ``m`` means ``x <= -m``; ``gt`` means
    ``x >= m``. The margin may be irrational, e.g. ``sqrt(2)/2``.
    """

    kind: str = "le"
    margin: object = 0

    def __post_init__(self):
        if self.kind not in ("le", "lt", "ge", "gt"):
            raise ValueError(f"bad claim kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Claim":
        text = text.strip()
        if ":" in text:
            k, m = text.split(":", 1)
            return cls(k.strip(), to_expr(m.strip()) if m.strip() else 0)
        return cls(text)

    def _margin(self) -> Expr:
        return to_expr(self.margin)

    def _positive_margin(self) -> bool:
        m = self._margin()
        n, d = rational_form(m)
        return not n.is_zero()

    def holds_set(self, x: Expr) -> SemialgSet:
        m = self._margin()
        pm = self._positive_margin()
        if self.kind == "le":
            return atom(x, "<=")
        if self.kind == "ge":
            return atom(x, ">=")
        if self.kind == "lt":
            return atom(x + m, "<=") if pm else atom(x, "<")
        return atom(x - m, ">=") if pm else atom(x, ">")

    def describe(self, x: Expr) -> str:
        return str(self.holds_set(x))


def _as_set(s) -> SemialgSet:
    if s is None:
        return TRUE
    if isinstance(s, str):
        return parse_set(s)
    return s


def _verdict(status: str) -> str:
    return {EMPTY: PROVED, NONEMPTY: DISPROVED, UNKNOWN: UNDETERMINED}[status]


def _box(box) -> Box:
    if box is None:
        return DEFAULT_BOX
    if isinstance(box, Box):
        return box
    return Box(box)


def sign_certify(x, region=None, box=None, claim="le", budget: Budget | None = None) -> Certificate:
    """Certify a sign claim on ``x`` over ``region`` within ``box``."""
    x = to_expr(x) if not isinstance(x, Expr) else x
    claim = Claim.parse(claim) if isinstance(claim, str) else claim
    region = _as_set(region)
    box = _box(box)
    target = region & ~claim.holds_set(x)
    stats = Stats()
    status, w = decide_empty(target.dnf(), box, budget, stats)
    desc = f"{claim.describe(x)} on {region}"
    return Certificate(desc, _verdict(status), box, w, stats)


def contains(a, b, box=None, budget: Budget | None = None) -> Certificate:
    """Certify ``a`` ⊆ ``b`` within box by emptiness of ``a ∧ ¬b``."""
    a, b = _as_set(a), _as_set(b)
    box = _box(box)
    stats = Stats()
    status, w = decide_empty((a & ~b).dnf(), box, budget, stats)
    return Certificate(f"{a} subset of {b}", _verdict(status), box, w, stats)


# ---------------------------------------------------------------------------
# coherence reduction
# ---------------------------------------------------------------------------

def reduce_coherent(p: Polynomial) -> Polynomial:
    """Normal form modulo ``d*e = 1`` and ``g^2 + h^2 = 1``."""
    out: dict = {}
    for m, c in p.terms.items():
        md = dict(m)
        k = min(md.get("d", 0), md.get("e", 0))
        if k:
            for v in ("d", "e"):
                md[v] -= k
                if md[v] == 0:
                    del md[v]
        out_poly = Polynomial({tuple(sorted(md.items(), key=lambda it: _rank(it[0]))): c})
        gk = md.get("g", 0)
        if gk >= 2:
            md2 = dict(md)
            del md2["g"]
            rest = Polynomial({tuple(sorted(md2.items(), key=lambda it: _rank(it[0]))): c})
            out_poly = rest * Polynomial.var("g", gk % 2) * (1 - Polynomial.var("h", 2)) ** (gk // 2)
        for mm, cc in out_poly.terms.items():
            out[mm] = out.get(mm, 0) + cc
    q = Polynomial(out)
    return q if q == p else reduce_coherent(q)


def _rank(v):
    from .poly import var_rank

    return var_rank(v)


def _implies_coherence(s: SemialgSet) -> bool:
    """Every DNF clause contains both coherence equalities (syntactically)."""
    circle = Polynomial.parse("g^2 + h^2 - 1")
    recip = Polynomial.parse("e*d - 1")
    clauses = s.dnf()
    if not clauses:
        return True
    for cl in clauses:
        found_c = found_r = False
        for a in cl:
            if a.rel != "=":
                continue
            n, d = rational_form(a.expr)
            if not d.is_constant() or n.is_zero():
                continue
            q = n.monic()
            found_c |= q == circle.monic()
            found_r |= q == recip.monic()
        if not (found_c and found_r):
            return False
    return True


def _field(mode) -> VectorField:
    if isinstance(mode, Mode):
        return mode.field
    if isinstance(mode, VectorField):
        return mode
    return VectorField(mode)


def _domain(mode) -> SemialgSet:
    return mode.domain if isinstance(mode, Mode) else TRUE


# ---------------------------------------------------------------------------
# differential invariants
# ---------------------------------------------------------------------------

def di_check(p, mode, extra=None, box=None, budget: Budget | None = None) -> Certificate:
    """Certify ``lie(p) <= 0`` on the mode domain intersected with ``extra``."""
    p = to_expr(p) if not isinstance(p, Expr) else p
    f = _field(mode)
    extra = _as_set(extra)
    region = _domain(mode) & extra
    box = _box(box)
    dp = expr_lie(p, f.polynomials())
    n, d = rational_form(dp)
    claim = f"d/dt({p}) <= 0 on {region}"
    if d.is_constant() and _implies_coherence(region):
        if reduce_coherent(n).is_zero():
            return Certificate(claim, PROVED, box, method="symbolic", note="derivative vanishes on coherent states")
    if d.is_constant() and not d.is_zero():
        x = PolyLeaf(reduce_coherent(n) * (1 / d.constant_value()) if _implies_coherence(region) else n * (1 / d.constant_value()))
    else:
        x = dp
    cert = sign_certify(x, region, box, "le", budget)
    cert.claim = claim
    if cert.verdict == DISPROVED:
        cert.note = "derivative is positive somewhere; the rule does not apply"
        cert.verdict = UNDETERMINED
    return cert


# ---------------------------------------------------------------------------
# invariance by boundary slices
# ---------------------------------------------------------------------------

def _divides(q: Polynomial, r: Polynomial) -> bool:
    if r.is_zero():
        return True
    return r.try_divide(q) is not None


def _atom_poly(a: Atom):
    n, d = rational_form(a.expr)
    return n, d


def _darboux_atom(a: Atom, f: VectorField, coherent: bool) -> bool:
    n, d = _atom_poly(a)
    if not d.is_constant():
        return False
    if any(v == "pi" or "(" in v for v in n.variables):
        return False
    if not set(n.variables) <= set(f.variables):
        return False
    ln = f.lie(n)
    if coherent:
        ln_r = reduce_coherent(ln)
        if ln_r.is_zero():
            return True
    return _divides(n, ln)


def _closure_set(atoms) -> SemialgSet:
    return clause_set([a.closure() for a in atoms])


def _neg_closure(a: Atom) -> SemialgSet:
    """Closure of the complement of an atom."""
    if a.rel == "<":
        return Atom(-a.expr, "<=")
    if a.rel == "<=":
        return Atom(-a.expr, "<=")
    return TRUE


def invariance_check(s, mode, domain=None, box=None, darboux: bool = False,
                     budget: Budget | None = None) -> Certificate:
    """Certify that flows of ``mode`` inside ``domain`` cannot leave ``s``.

    Works clause by clause on a CNF of ``s``: at every boundary point of an
    atom ``q < 0`` or ``q <= 0`` where the other literals of the clause fail
    and the rest of ``s`` and the domain hold (closures), the vector field
    must point strictly inward. Equality atoms need ``q | lie(q)``. With
    ``darboux`` set, atoms whose Lie derivative vanishes on coherent states
    or is a multiple of the atom are discharged symbolically.
    """
    s = _as_set(s)
    f = _field(mode)
    domain = _as_set(domain) if domain is not None else _domain(mode)
    box = _box(box)
    stats = Stats()
    t0 = time.perf_counter()
    cnf = s.cnf()
    claim = f"{s} invariant under {getattr(mode, 'name', 'field')} within {domain}"
    coherent = _implies_coherence(s)
    if cnf == [[]]:
        return Certificate(claim, PROVED, box, stats=stats, method="symbolic", note="empty set")
    dom_dnf = domain.dnf()
    verdict = PROVED
    witness = None
    for ci, clause in enumerate(cnf):
        others = [c for j, c in enumerate(cnf) if j != ci]
        rest = TRUE
        for c in others:
            rest = rest & _or_closure(c)
        for ai, a in enumerate(clause):
            n, d = _atom_poly(a)
            if a.rel == "=":
                if d.is_constant() and _darboux_atom(a, f, coherent):
                    continue
                verdict = UNDETERMINED
                continue
            if darboux and _darboux_atom(a, f, coherent):
                continue
            lits = TRUE
            for bj, b in enumerate(clause):
                if bj != ai:
                    lits = lits & _neg_closure(b)
            q = a.expr
            qdot = expr_lie(q, f.polynomials())
            for dcl in dom_dnf:
                if any(b == a for b in dcl):
                    continue  # leaving through this face also leaves the domain
                slice_set = Atom(q, "=") & lits & rest & _closure_set(dcl) & atom(qdot, ">=")
                status, w = decide_empty(slice_set.dnf(), box, budget, stats)
                if status == EMPTY:
                    continue
                verdict = UNDETERMINED
                if w is not None and witness is None:
                    witness = w
    stats.wall_time = time.perf_counter() - t0
    note = "a boundary point with outward or tangent flow was found" if witness else ""
    return Certificate(claim, verdict, box, witness, stats, method="boundary", note=note)


def _or_closure(clause) -> SemialgSet:
    from .sets import Or

    parts = tuple(a.closure() for a in clause)
    return parts[0] if len(parts) == 1 else Or(parts)


def darboux_invariance(pair, f) -> Certificate:
    """Check the Darboux identity ``lie(p) = c*p`` exactly."""
    from .darboux import DarbouxPair, verify

    if isinstance(pair, tuple):
        p, c = (Polynomial.coerce(x) for x in pair)
        pair = DarbouxPair(p, c)
    f = _field(f)
    claim = f"lie({pair.p}) = ({pair.cofactor})*({pair.p})"
    if verify(pair, f):
        return Certificate(claim, PROVED, method="symbolic")
    resid = f.lie(pair.p) - pair.cofactor * pair.p
    w = _nonzero_point(resid)
    return Certificate(claim, DISPROVED, witness=w, method="symbolic",
                       note=f"residual {resid}")


def _nonzero_point(p: Polynomial) -> dict:
    vs = p.variables
    for k in range(1, 50):
        pt = {v: Fraction(k + i, k + 2 * i + 1) for i, v in enumerate(vs)}
        if p.evaluate(pt) != 0:
            return {v: float(x) for v, x in pt.items()}
    return {v: 1.0 for v in vs}

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hykeep.certify import (
    DISPROVED, PROVED, UNDETERMINED, Claim, contains, darboux_invariance, di_check,
    interval_eval, invariance_check, sign_certify,
)
from hykeep.darboux import DarbouxPair
from hykeep.dynamics import COHERENCE, plant_field
from hykeep.expr import parse_expr
from hykeep.feasibility import DEFAULT_BOX, Box, Budget
from hykeep.interval import DivisionInterval
from hykeep.poly import Polynomial
from hykeep.sets import parse_set

from conftest import polys

X = "-2*g*(h + 1)/e"
REGION = "2*g^2 > 1 & g > 0 & e > 0"
BOX = Box({"g": (0.71, 1.0), "h": (-1.0, 1.0), "e": (0.5, 2.0)})
BOX_FULL_H = Box({"g": (-1.0, 1.0), "h": (-1.0, 1.0), "e": (0.5, 2.0)})
ULP8 = math.ulp(8.0)


# -- interval_eval -----------------------------------------------------------

def test_enclosure_examples():
    iv = interval_eval(parse_expr(X), BOX)
    assert -8 - ULP8 <= iv.lo and iv.hi <= ULP8
    c = interval_eval(parse_expr("cos(phi)"), Box({"phi": (0.0, math.pi / 4)}))
    assert c.lo <= math.sqrt(2) / 2 <= c.lo + 1e-15 and c.hi >= 1.0
    three = interval_eval(parse_expr("3"), BOX)
    assert (three.lo, three.hi) == (3.0, 3.0)


def test_division_interval():
    with pytest.raises(DivisionInterval):
        interval_eval(parse_expr("1/h"), BOX)


# -- sign_certify, contains ----------------------------------------------------

def test_sign_examples():
    assert sign_certify(X, REGION, BOX, "le").verdict == PROVED
    c = sign_certify(X, REGION, BOX, Claim("lt", parse_expr("1/100")))
    assert c.verdict == DISPROVED
    assert abs(c.witness["h"] + 1) < 0.1
    val = parse_expr(X).evaluate(c.witness, "mp")
    assert val > -mpmath.mpf(1) / 100
    c = sign_certify("-g", "2*g^2 > 1 & g > 0", BOX_FULL_H, Claim.parse("lt:sqrt(2)/2"))
    assert c.verdict == PROVED


def test_contains_examples():
    box = Box({"d": (0.0, 10.0), "h": (-1.0, 1.0)})
    assert contains("d^2 + 2*d*h <= 0 & d > 0", "d <= 2", box).verdict == PROVED
    a = parse_set("g > 0 & 2*g^2 > 1 & h < 0")
    assert contains(a, a, DEFAULT_BOX).verdict == PROVED
    assert contains("d <= 3", "d <= 2", box).verdict == DISPROVED


def test_di_examples(model):
    const, prop = model.mode("constant"), model.mode("proportional")
    c = di_check("d^2 + 2*d*h", const, COHERENCE)
    assert c.verdict == PROVED and c.method == "symbolic"
    assert di_check("d^2 + 2*d*h", prop, COHERENCE).verdict == PROVED
    assert di_check("h", prop, COHERENCE).verdict == UNDETERMINED


def test_invariance_examples(model):
    prop = model.mode("proportional")
    s = parse_set("2*g^2 > 1 & g > 0 & h > 0 & g^2 + h^2 = 1 & e*d = 1 & d > 0")
    xt = parse_set("g > 0 & h > 0 & 2*g - sqrt(2) <= 5e-7 & 2*g - sqrt(2) >= -5e-7"
                   " & 2*h - sqrt(2) <= 5e-7 & 2*h - sqrt(2) >= -5e-7")
    dom = ~(parse_set("d > 0") & xt)
    assert invariance_check(s, prop, dom, darboux=True).verdict == PROVED
    assert invariance_check(parse_set("true"), prop).verdict == PROVED
    assert invariance_check(parse_set("h >= 0"), prop).verdict == UNDETERMINED


def test_darboux_invariance_examples():
    f = plant_field(1)
    P = Polynomial.parse
    assert darboux_invariance(DarbouxPair(P("h"), P("g*e")), f).verdict == DISPROVED
    assert darboux_invariance(DarbouxPair(P("e*d - 1"), P("g*e")), f).verdict == PROVED


# -- properties -----------------------------------------------------------------

@st.composite
def exprs(draw):
    v = ("g", "h", "e")
    p1, p2, p3 = (draw(polys(v, maxterms=3, maxdeg=2)) for _ in range(3))
    return parse_expr(f"({p1})*cos(phi) + ({p2})*sin(phi) + ({p3})/(1 + e^2)")


@st.composite
def sub_boxes(draw):
    b = {}
    for v, (lo, hi) in {"g": (-1, 1), "h": (-1, 1), "e": (0.1, 3), "phi": (0, 2 * math.pi)}.items():
        a, c = sorted(draw(st.floats(lo, hi)) for _ in range(2))
        b[v] = (a + 0.0, c + 0.0)
    return Box(b)


@st.composite
def box_and_point(draw):
    box = draw(sub_boxes())
    pt = {v: draw(st.floats(iv.lo, iv.hi)) for v, iv in box.items()}
    return box, pt


@settings(max_examples=10_000)
@given(exprs(), box_and_point())
def test_enclosure_soundness(x, bp):
    box, pt = bp
    iv = interval_eval(x, box)
    val = x.evaluate(pt, "mp")
    assert iv.lo <= val <= iv.hi


@given(exprs(), sub_boxes(), st.integers(0, 3), st.integers(1, 4))
def test_split_invariance(x, box, axis, parts):
    v = box.variables[axis]
    iv = box[v]
    cuts = [iv.lo + (iv.hi - iv.lo) * k / parts for k in range(parts + 1)]
    cuts[-1] = iv.hi
    whole = interval_eval(x, box)
    for a, b in zip(cuts, cuts[1:]):
        piece = interval_eval(x, box.with_(v, type(iv)(a, b)))
        assert whole.lo <= piece.lo and piece.hi <= whole.hi


SMALL = Budget(max_depth=20, max_boxes=3000, min_rel_width=1e-6)
GH_BOX = Box({"g": (-1.0, 1.0), "h": (-1.0, 1.0)})
REGIONS = ["g > 0", "h < 0 & g > 0", "g^2 + h^2 < 1", "2*g^2 > 1 & g > 0", "g - h > 0"]
_rng = np.random.default_rng(7)
_SAMPLES = _rng.uniform(-1, 1, size=(20_000, 2))


def _claim_holds(c: Claim, val, tol=0.0):
    m = float(interval_eval(c._margin(), Box({})).mid) if c._positive_margin() else 0.0
    return {"le": val <= tol, "lt": val <= -m + tol if m else val < tol,
            "ge": val >= -tol, "gt": val >= m - tol if m else val > -tol}[c.kind]


@given(polys(("g", "h"), maxterms=3, maxdeg=2), st.sampled_from(REGIONS),
       st.sampled_from(["le", "lt", "ge", "gt", "lt:1/4", "gt:1/4"]))
def test_verdict_soundness(p, region, claim):
    c = Claim.parse(claim)
    cert = sign_certify(p, region, GH_BOX, c, SMALL)
    if cert.verdict == PROVED:
        reg = parse_set(region)
        g, h = _SAMPLES[:, 0], _SAMPLES[:, 1]
        n = 0
        for gi, hi in zip(g, h):
            pt = {"g": float(gi), "h": float(hi)}
            if reg.contains_point(pt, "float"):
                assert _claim_holds(c, p.float_value(pt), 1e-12)
                n += 1
                if n >= 1000:
                    break
    elif cert.verdict == DISPROVED:
        w = {k: mpmath.mpf(v) for k, v in cert.witness.items()}
        for a in parse_set(region).dnf()[0]:
            val = a.expr.evaluate(w, "mp")
            assert val <= 1e-25 if a.rel != "=" else abs(val) <= 1e-25
        assert not _claim_holds(c, float(p.evaluate(w)), -1e-25)


@given(polys(("g", "h"), maxterms=3, maxdeg=2), st.sampled_from(REGIONS), st.floats(0, 0.9), st.floats(0, 0.9))
def test_shrinking_box_keeps_proved(p, region, a, b):
    big = sign_certify(p, region, GH_BOX, "le", SMALL)
    small_box = Box({"g": (-1.0 + a, 1.0 - b), "h": (-1.0 + b, 1.0 - a)})
    small = sign_certify(p, region, small_box, "le", SMALL)
    if big.verdict == PROVED:
        assert small.verdict != DISPROVED
    tighter = sign_certify(p, f"({region}) & g < 1/2", GH_BOX, "le", SMALL)
    if big.verdict == PROVED:
        assert tighter.verdict != DISPROVED

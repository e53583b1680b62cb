import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hykeep.certify import DISPROVED, PROVED, UNDETERMINED, Certificate, contains
from hykeep.dynamics import COHERENCE, regions
from hykeep.expr import PolyLeaf
from hykeep.feasibility import DEFAULT_BOX, Box
from hykeep.poly import Polynomial
from hykeep.reach import (
    ChainReport, StageReport, premise_progress, run_chain, sp_check, station_keeping_stages, time_bound,
)
from hykeep.sets import FALSE, parse_set


@pytest.fixture(scope="module")
def stages():
    return station_keeping_stages()


@pytest.fixture(scope="module")
def chain(stages):
    return run_chain(stages)


def test_stage_layout(stages):
    assert len(stages) == 3
    assert str(stages[0].progress) == "d"
    assert stages[1].progress.free_symbols() == {"phi"}
    assert stages[2].XT == parse_set("d^2 + 2*d*h <= 0")


def test_stage_one_and_two_all_proved(chain):
    for rep in chain.stages[:2]:
        assert rep.verdict == PROVED
        assert all(c.verdict == PROVED for c in rep.premises.values())


def test_stage_one_too_fast_is_disproved(stages):
    c = premise_progress(stages[0], epsilon=2)
    assert c.verdict == DISPROVED
    w = c.witness
    assert -w["g"] > -2


def test_chain_proved(chain):
    assert chain.verdict == PROVED
    premises = [c for s in chain.stages for c in s.premises.values()]
    assert len(premises) == 12 and all(c.verdict == PROVED for c in premises)
    assert len(chain.links) == 3 and all(c.verdict == PROVED for c in chain.links)
    assert all(c.verdict == PROVED for c in chain.coverage)


def test_time_bounds(chain):
    tb = [s.time_bound for s in chain.stages]
    assert tb[0] == pytest.approx(math.sqrt(2) * 100, rel=1e-12)
    assert tb[1] == pytest.approx(7 * math.pi / 2, rel=1e-12)
    st8 = station_keeping_stages(Box.parse(["d=1e-3:8"], DEFAULT_BOX))[0]
    assert time_bound(st8) == pytest.approx(8 * math.sqrt(2), rel=1e-12)


def test_undetermined_stage_spoils_chain(chain):
    bad = StageReport("stage x", {k: Certificate("c", UNDETERMINED) for k in ("progress", "entry", "invariance", "domain")})
    mixed = ChainReport([chain.stages[0], bad, chain.stages[2]], chain.links, chain.coverage)
    assert mixed.verdict == UNDETERMINED
    one = dict(chain.stages[0].premises, entry=Certificate("c", UNDETERMINED))
    assert ChainReport([StageReport("s", one)], chain.links).verdict == UNDETERMINED


def test_report_json(chain):
    js = chain.to_json()
    assert js["verdict"] == PROVED and len(js["stages"]) == 3
    assert "reachability" in chain.table()


def test_regions_cover_the_half_plane():
    regs = regions()
    union = regs["R1"] | regs["R2"] | regs["R3"] | regs["R4"] | parse_set("phi = 0")
    dom = parse_set("d > 0 & phi >= 0 & phi < 2*pi") & COHERENCE
    assert contains(dom, union, DEFAULT_BOX).verdict == PROVED


@pytest.mark.parametrize("a,b", [("R1", "R2"), ("R1", "R3"), ("R2", "R3")])
def test_region_interiors_disjoint(a, b):
    regs = regions()
    assert contains(regs[a] & regs[b] & COHERENCE, FALSE, DEFAULT_BOX).verdict == PROVED


@given(st.fractions(min_value=Fraction(1, 10**6), max_value=Fraction(7071, 10**4), max_denominator=10**6))
def test_epsilon_monotone(eps):
    st1 = station_keeping_stages()[0]
    assert premise_progress(st1, PolyLeaf(Polynomial.const(eps))).verdict == PROVED

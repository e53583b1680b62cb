"""Staging-set reachability: the four-premise rule and the three-stage chain.

A stage says: inside the invariant set ``S`` the progress function ``p``
stays nonnegative and decreases at rate at least ``epsilon`` until the
flow enters ``H ∧ X_T``. Stages are linked by containment of each target
in the next stage's initial set (or the final target).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .certify import (
    DISPROVED, PROVED, UNDETERMINED, Box, Budget, Certificate, Claim,
    contains, interval_eval, invariance_check, reduce_coherent, sign_certify,
    _implies_coherence,
)
from .dynamics import COHERENCE, V_CST, Mode, regions, station_keeping_model
from .expr import Expr, PolyLeaf, expr_lie, parse_expr, rational_form, to_expr
from .feasibility import DEFAULT_BOX, Stats
from .sets import SemialgSet, TRUE, parse_set

__all__ = [
    "StageSpec",
    "StageReport",
    "ChainReport",
    "ChainBroken",
    "sp_check",
    "premise_progress",
    "station_keeping_stages",
    "run_chain",
    "region_coverage",
    "TARGET_BAND",
]

TARGET_BAND = 1e-6
PREMISES = ("progress", "entry", "invariance", "domain")


class ChainBroken(RuntimeError):
    """A stage target is not contained in the next stage's initial set."""

    def __init__(self, msg: str, certificate: Certificate | None = None):
        super().__init__(msg)
        self.certificate = certificate


@dataclass
class StageSpec:
    name: str
    X0: SemialgSet
    XT: SemialgSet
    S: SemialgSet
    H: SemialgSet
    progress: Expr
    epsilon: Expr
    mode: Mode
    box: Box = DEFAULT_BOX
    XT_exact: SemialgSet | None = None

    def __post_init__(self):
        for k in ("X0", "XT", "S", "H"):
            v = getattr(self, k)
            if isinstance(v, str):
                setattr(self, k, parse_set(v))
        if isinstance(self.XT_exact, str):
            self.XT_exact = parse_set(self.XT_exact)
        self.progress = to_expr(self.progress) if not isinstance(self.progress, Expr) else self.progress
        self.epsilon = to_expr(self.epsilon) if not isinstance(self.epsilon, Expr) else self.epsilon
        if not interval_eval(self.epsilon, Box({})).lo > 0:
            raise ValueError("epsilon must be positive")
        extra = self.progress.free_symbols() - set(self.mode.field.variables)
        if extra:
            raise ValueError(f"progress uses {sorted(extra)} outside the mode variables")

    @property
    def target(self) -> SemialgSet:
        return self.XT_exact if self.XT_exact is not None else self.XT


@dataclass
class StageReport:
    stage: str
    premises: dict
    time_bound: float | None = None

    @property
    def verdict(self) -> str:
        vs = [c.verdict for c in self.premises.values()]
        if all(v == PROVED for v in vs):
            return PROVED
        if any(v == DISPROVED for v in vs):
            return DISPROVED
        return UNDETERMINED

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "verdict": self.verdict,
            "time_bound": self.time_bound,
            "premises": {k: c.to_json() for k, c in self.premises.items()},
        }


@dataclass
class ChainReport:
    stages: list
    links: list
    coverage: list = field(default_factory=list)
    box: Box = DEFAULT_BOX

    @property
    def verdict(self) -> str:
        vs = [s.verdict for s in self.stages] + [c.verdict for c in self.links + self.coverage]
        if vs and all(v == PROVED for v in vs):
            return PROVED
        if any(v == DISPROVED for v in vs):
            return DISPROVED
        return UNDETERMINED

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "box": self.box.to_json(),
            "stages": [s.to_json() for s in self.stages],
            "links": [c.to_json() for c in self.links],
            "coverage": [c.to_json() for c in self.coverage],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [f"{'stage':<10} {'premise':<11} {'verdict':<13} {'boxes':>8} {'time[s]':>9}"]
        for s in self.stages:
            for k, c in s.premises.items():
                rows.append(f"{s.stage:<10} {k:<11} {c.verdict:<13} {c.stats.boxes:>8} {c.stats.wall_time:>9.3f}")
            if s.time_bound is not None:
                rows.append(f"{s.stage:<10} {'time bound':<11} {s.time_bound:.6g} s")
        for i, c in enumerate(self.links, 1):
            rows.append(f"{'link ' + str(i):<10} {'contains':<11} {c.verdict:<13} {c.stats.boxes:>8} {c.stats.wall_time:>9.3f}")
        for c in self.coverage:
            rows.append(f"{'coverage':<10} {c.claim.split(' ')[0]:<11} {c.verdict:<13} {c.stats.boxes:>8} {c.stats.wall_time:>9.3f}")
        rows.append(f"reachability of d^2 + 2*d*h <= 0 from coherent generic states: {self.verdict}")
        return "\n".join(rows)


def _combine(name: str, certs: list) -> Certificate:
    vs = [c.verdict for c in certs]
    if all(v == PROVED for v in vs):
        verdict = PROVED
    elif any(v == DISPROVED for v in vs):
        verdict = DISPROVED
    else:
        verdict = UNDETERMINED
    stats = Stats()
    for c in certs:
        stats.merge(c.stats)
    w = next((c.witness for c in certs if c.verdict == DISPROVED), None)
    return Certificate(name, verdict, certs[0].box, w, stats, method="conjunction", premises=certs)


def premise_progress(st: StageSpec, epsilon=None, budget: Budget | None = None) -> Certificate:
    """``S → p >= 0 ∧ dp/dt <= -epsilon``."""
    eps = st.epsilon if epsilon is None else to_expr(epsilon)
    dp = expr_lie(st.progress, st.mode.field.polynomials())
    n, d = rational_form(dp)
    if d.is_constant() and _implies_coherence(st.S):
        dp = PolyLeaf(reduce_coherent(n) * (1 / d.constant_value()))
    c1 = sign_certify(st.progress, st.S, st.box, "ge", budget)
    c2 = sign_certify(dp, st.S, st.box, Claim("lt", eps), budget)
    return _combine(f"{st.progress} >= 0 and d/dt <= -({eps}) on S", [c1, c2])


def sp_check(st: StageSpec, budget: Budget | None = None) -> StageReport:
    """Check the four premises of the staging-set rule."""
    p1 = premise_progress(st, budget=budget)
    p2 = contains(st.X0 & ~st.XT, st.S, st.box, budget)
    p3 = invariance_check(st.S, st.mode, ~(st.H & st.XT), st.box, darboux=True, budget=budget)
    p4 = contains(st.X0 | st.S, st.H, st.box, budget)
    report = StageReport(st.name, dict(zip(PREMISES, (p1, p2, p3, p4))))
    if p1.verdict == PROVED:
        report.time_bound = time_bound(st)
    return report


def time_bound(st: StageSpec) -> float:
    """Upper bound P_max/epsilon on the stage duration, P_max from the box."""
    pmax = interval_eval(st.progress, st.box).hi
    eps = interval_eval(st.epsilon, Box({})).lo
    return max(pmax, 0.0) / eps


# ---------------------------------------------------------------------------
# the station-keeping chain
# ---------------------------------------------------------------------------

_D = "g^2 + h^2 = 1 & e*d = 1 & d > 0"
_V = "d^2 + 2*d*h"


def _band(x: str, half: float) -> str:
    return f"{x} - {half!r} <= 0 & {x} + {half!r} >= 0"


def station_keeping_stages(box: Box | None = None, band: float = TARGET_BAND) -> list:
    """Stages from the bearing sectors near the circle to the inner disc."""
    box = box or DEFAULT_BOX
    sysm = station_keeping_model()
    prop, const = sysm.mode("proportional"), sysm.mode("constant")
    x0_1 = parse_set(f"g > 0 & 2*g^2 > 1 & h > 0 & {_D}")
    half = band / 2
    s1 = StageSpec(
        "stage 1", x0_1,
        XT=parse_set(f"g > 0 & h > 0 & {_band('2*g - sqrt(2)', half)} & {_band('2*h - sqrt(2)', half)}"),
        S=x0_1, H=parse_set("d > 0"), progress=parse_expr("d"), epsilon=parse_expr("sqrt(2)/2"),
        mode=prop, box=box, XT_exact=parse_set("2*g = sqrt(2) & 2*h = sqrt(2)"),
    )
    x0_2 = parse_set(f"(g <= 0 | 2*g^2 <= 1) & {_V} > 0 & {_D}")
    s2 = StageSpec(
        "stage 2", x0_2, XT=parse_set("g > 0 & 2*g^2 > 1 & h < 0"), S=x0_2, H=parse_set("d > 0"),
        progress=parse_expr("-phi + 7*pi/4"), epsilon=parse_expr("1/2"), mode=const, box=box,
    )
    x0_3 = parse_set(f"g > 0 & 2*g^2 > 1 & h < 0 & {_V} > 0 & {_D}")
    s3 = StageSpec(
        "stage 3", x0_3, XT=parse_set(f"{_V} <= 0"), S=x0_3, H=parse_set("d > 0"),
        progress=parse_expr("d"), epsilon=parse_expr("sqrt(2)/2"), mode=prop, box=box,
    )
    return [s1, s2, s3]


FINAL_TARGET = parse_set(f"{_V} <= 0")


def region_coverage(stages: list, box: Box | None = None, budget: Budget | None = None) -> list:
    """Each bearing region (with coherence) lies in its stage's initial set."""
    box = box or stages[0].box
    regs = regions()
    out = []
    for name, st in zip(("R1", "R2", "R3"), stages):
        c = contains(regs[name] & COHERENCE, st.X0, box, budget)
        c.claim = f"{name} in X0 of {st.name}"
        out.append(c)
    return out


def run_chain(stages: list, budget: Budget | None = None, final_target: SemialgSet | None = None,
              coverage: bool = True, strict: bool = True) -> ChainReport:
    """Check every stage and every link; raise ChainBroken on a failed link."""
    final_target = FINAL_TARGET if final_target is None else final_target
    box = stages[0].box if stages else DEFAULT_BOX
    reports = [sp_check(st, budget) for st in stages]
    links = []
    for i, st in enumerate(stages):
        nxt = stages[i + 1].X0 | final_target if i + 1 < len(stages) else final_target
        c = contains(st.target & COHERENCE, nxt, st.box, budget)
        c.claim = f"target of {st.name} enters " + (stages[i + 1].name if i + 1 < len(stages) else "the final target")
        links.append(c)
        if strict and c.verdict == DISPROVED:
            raise ChainBroken(c.claim + f" fails at {c.witness}", c)
    cov = region_coverage(stages, box, budget) if coverage and len(stages) == 3 else []
    return ChainReport(reports, links, cov, box)

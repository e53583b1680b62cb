"""``hykeep`` command line: certificates, simulations, figures and reports."""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import dataclass, field

import click
import numpy as np

from . import __version__
from .certify import DISPROVED, PROVED, UNDETERMINED, Certificate, contains, di_check
from .darboux import first_integrals, search
from .dynamics import COHERENCE, STATE_VARS, V_CST, model_to_json, station_keeping_model
from .feasibility import DEFAULT_BOX, Box, Budget
from .figures import phase_portrait_svg, region_overlay_svg
from .reach import ChainBroken, run_chain, station_keeping_stages
from .sets import parse_set

EXIT_OK, EXIT_DISPROVED, EXIT_UNDETERMINED, EXIT_USAGE = 0, 1, 2, 64

MODE_ALIASES = {"u1": "constant", "uh": "proportional", "constant": "constant", "proportional": "proportional"}

SAFE_SET = parse_set("d^2 + 2*d*h <= 0 & d > 0")

# the clause 112/pi*phi - 25*d - 6 >= 0 is multiplied through by pi > 0
INTERVAL_METHOD_REGION = parse_set(
    "(d >= 0 & d <= 2)"
    " | (((phi >= 0 & 6*phi <= pi) | (4*phi >= 7*pi & phi <= 2*pi)) & d >= 0 & 5*d <= 38)"
    " | (2*phi >= pi & 4*phi <= 7*pi & d >= 2 & 5*d <= 38 & 112*phi - 25*pi*d - 6*pi >= 0)"
)


def exit_code(verdicts) -> int:
    vs = list(verdicts)
    if any(v == DISPROVED for v in vs):
        return EXIT_DISPROVED
    if any(v == UNDETERMINED for v in vs):
        return EXIT_UNDETERMINED
    return EXIT_OK


@dataclass
class Report:
    command: str
    box: Box
    certificates: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def add(self, name: str, cert: Certificate):
        self.certificates[name] = cert

    def verdicts(self):
        return [c.verdict for c in self.certificates.values()]

    def to_json(self) -> dict:
        return {
            "tool": "hykeep",
            "version": __version__,
            "model_hash": station_keeping_model().fingerprint(),
            "box": self.box.to_json(),
            "command": self.command,
            "certificates": {k: c.to_json() for k, c in self.certificates.items()},
            "results": self.results,
            "timings": self.timings,
            "notes": list(self.notes),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# region comparison
# ---------------------------------------------------------------------------

def classify(phi, d) -> dict:
    """Membership of (phi, d) in V <= 0, V <= -1/2 and the interval-method set."""
    phi = np.asarray(phi, dtype=float)
    d = np.asarray(d, dtype=float)
    v = d * d + 2 * d * np.sin(phi)
    pi = math.pi
    c1 = (d >= 0) & (d <= 2)
    c2 = (((phi >= 0) & (phi <= pi / 6)) | ((phi >= 7 * pi / 4) & (phi <= 2 * pi))) & (d >= 0) & (d <= 7.6)
    c3 = (phi >= pi / 2) & (phi <= 7 * pi / 4) & (d >= 2) & (d <= 7.6) & (112 / pi * phi - 25 * d - 6 >= 0)
    return {"V<=0": v <= 0, "V<=-1/2": v <= -0.5, "interval": c1 | c2 | c3}


def compare_regions(grid: int = 500) -> dict:
    """Grid classification over (0, 2 pi) x (0, 8] and the overlay figure."""
    if grid < 10:
        raise ValueError("grid must be at least 10")
    phi = (np.arange(grid) + 0.5) * (2 * math.pi / grid)
    d = (np.arange(grid) + 1) * (8.0 / grid)
    P, D = np.meshgrid(phi, d, indexing="ij")
    m = classify(P, D)
    v0, vh, iv = m["V<=0"], m["V<=-1/2"], m["interval"]

    def frac(a, b):
        n = int(a.sum())
        return float((a & b).sum() / n) if n else 1.0

    return {
        "grid": grid,
        "counts": {k: int(x.sum()) for k, x in m.items()},
        "fraction_V0_in_interval": frac(v0, iv),
        "fraction_Vhalf_in_V0": frac(vh, v0),
        "fraction_Vhalf_in_interval": frac(vh, iv),
        "svg": region_overlay_svg(),
    }


# ---------------------------------------------------------------------------
# options
# ---------------------------------------------------------------------------

_STATE_AXES = ("g", "h", "e", "d", "phi", "alpha")


def _parse_box(ctx, param, value):
    try:
        for item in value:
            name = item.split("=", 1)[0].strip()
            if name not in _STATE_AXES:
                raise ValueError(f"unknown box axis {name!r}; expected one of {', '.join(_STATE_AXES)}")
        return Box.parse(value, base=DEFAULT_BOX)
    except (ValueError, KeyError) as exc:
        raise click.BadParameter(str(exc), ctx=ctx, param=param)


def common(f):
    opts = [
        click.option("--box", "box", multiple=True, callback=_parse_box, metavar="k=lo:hi",
                     help="Override one box axis; repeatable."),
        click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Write a JSON report."),
        click.option("--svg", "svg_path", type=click.Path(dir_okay=False), help="Write an SVG figure."),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--budget", type=click.IntRange(min=1), default=10**6, show_default=True,
                     help="Maximum number of boxes per certificate."),
        click.option("--max-depth", type=click.IntRange(min=1), default=40, show_default=True),
        click.option("--min-width", type=click.FloatRange(min=0, min_open=True), default=1e-9, show_default=True,
                     help="Minimum relative box width."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _budget(kw) -> Budget:
    return Budget(max_depth=kw["max_depth"], max_boxes=kw["budget"], min_rel_width=kw["min_width"])


def _write(path, text):
    if path:
        with open(path, "w") as fh:
            fh.write(text)


def _finish(report: Report, kw, svg: str | None = None) -> int:
    _write(kw.get("json_path"), report.dumps())
    if svg is not None:
        _write(kw.get("svg_path"), svg)
    return exit_code(report.verdicts())


def _command_line() -> str:
    return " ".join(["hykeep", *sys.argv[1:]])


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="hykeep")
def cli():
    """Certified analysis of the switched station-keeping controller."""


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

@cli.command()
@common
def model(**kw):
    """Print the polynomial hybrid model and its hash."""
    sysm = station_keeping_model()
    m = model_to_json(sysm)
    click.echo(f"model hash {sysm.fingerprint()}")
    for mode in m["modes"]:
        click.echo(f"mode {mode['name']}: u = {mode['control']}; domain {mode['domain']}")
        for v, rhs in mode["field"].items():
            click.echo(f"  {v}' = {rhs}")
    click.echo(f"coherence: {m['coherence']}")
    rep = Report(_command_line(), kw["box"], results={"model": m})
    return _finish(rep, kw)


def _parse_coeffs(ctx, param, value):
    try:
        lo, hi = (int(x) for x in value.split(":"))
    except ValueError:
        raise click.BadParameter("expected lo:hi integers", ctx=ctx, param=param)
    if lo > hi:
        raise click.BadParameter("lo must not exceed hi", ctx=ctx, param=param)
    return range(lo, hi + 1)


@cli.command()
@common
@click.option("--mode", "mode_name", type=click.Choice(sorted(MODE_ALIASES)), default="u1", show_default=True)
@click.option("--pdeg", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--cofdeg", type=click.IntRange(min=0), default=2, show_default=True)
@click.option("--coeffs", default="-2:2", callback=_parse_coeffs, show_default=True,
              help="Cofactor coefficient range lo:hi.")
@click.option("--terms", type=click.IntRange(min=1), default=2, show_default=True,
              help="Maximum number of cofactor terms.")
@click.option("--vars", "vars_", type=click.Choice(["ghe", "all"]), default="ghe", show_default=True)
def darboux(mode_name, pdeg, cofdeg, coeffs, terms, vars_, **kw):
    """Search Darboux polynomials and the first integrals they combine into."""
    sysm = station_keeping_model()
    mode = sysm.mode(MODE_ALIASES[mode_name])
    variables = ("g", "h", "e") if vars_ == "ghe" else STATE_VARS
    t0 = time.perf_counter()
    pairs = search(mode.field, pdeg, cofdeg, variables, coeffs, terms)
    fis = first_integrals(pairs, mode.field.restrict(variables))
    dt = time.perf_counter() - t0
    click.echo(f"{'p':<24} {'cofactor':<16}")
    for pr in pairs:
        click.echo(f"{str(pr.p):<24} {str(pr.cofactor):<16}")
    for fi in fis:
        click.echo(f"first integral {fi.expr}  exponents {list(fi.exponents)}")
    click.echo(f"{len(pairs)} pairs in {dt:.2f} s")
    rep = Report(_command_line(), kw["box"], results={
        "mode": mode.name, "pdeg": pdeg, "cofdeg": cofdeg, "coeffs": [coeffs.start, coeffs.stop - 1],
        "terms": terms, "variables": list(variables),
        "pairs": [pr.to_json() for pr in pairs], "first_integrals": [fi.to_json() for fi in fis],
    }, timings={"darboux": dt})
    return _finish(rep, kw)


@cli.command()
@common
@click.option("--expr", "expr", default=str(V_CST), show_default=True, help="Barrier p; checks p <= 0.")
def safety(expr, **kw):
    """Differential-invariant check of p <= 0 in both modes under coherence."""
    sysm = station_keeping_model()
    rep = Report(_command_line(), kw["box"])
    for mode in sysm.modes:
        c = di_check(expr, mode, COHERENCE, kw["box"], _budget(kw))
        rep.add(f"di {mode.name}", c)
        rep.timings[f"di {mode.name}"] = c.stats.wall_time
        click.echo(f"{mode.name:<13} {c.verdict:<13} {c.method}")
    verdict = PROVED if exit_code(rep.verdicts()) == EXIT_OK else UNDETERMINED
    click.echo(f"invariance of {expr} <= 0: {verdict}")
    return _finish(rep, kw)


@cli.command()
@common
@click.option("--band", type=click.FloatRange(min=0, min_open=True), default=1e-6, show_default=True,
              help="Width of the thickened stage-1 target.")
def reach(band, **kw):
    """Staging-set chain from every generic start into d^2 + 2dh <= 0."""
    rep = Report(_command_line(), kw["box"])
    budget = _budget(kw)
    t0 = time.perf_counter()
    try:
        chain = run_chain(station_keeping_stages(kw["box"], band), budget)
        if chain.verdict == UNDETERMINED:
            rep.notes.append("undetermined at the requested budget; rerun at budget x10")
            chain = run_chain(station_keeping_stages(kw["box"], band), budget.scaled(10))
    except ChainBroken as exc:
        click.echo(f"chain broken: {exc}")
        rep.add("link", exc.certificate)
        _finish(rep, kw)
        return EXIT_DISPROVED
    rep.timings["reach"] = time.perf_counter() - t0
    for s in chain.stages:
        for k, c in s.premises.items():
            rep.add(f"{s.stage} {k}", c)
    for i, c in enumerate(chain.links, 1):
        rep.add(f"link {i}", c)
    for c in chain.coverage:
        rep.add(c.claim, c)
    rep.results["time_bounds"] = {s.stage: s.time_bound for s in chain.stages}
    rep.results["verdict"] = chain.verdict
    click.echo(chain.table())
    for n in rep.notes:
        click.echo(f"note: {n}")
    return _finish(rep, kw)


def _sim_cfg(kw):
    from .sim import SimConfig

    return SimConfig(dt=kw["dt"], horizon=kw["horizon"], hysteresis=kw["hysteresis"])


def sim_options(f):
    for o in reversed([
        click.option("--dt", type=click.FloatRange(min=0, min_open=True), default=1e-3, show_default=True),
        click.option("--horizon", type=click.FloatRange(min=0, min_open=True), default=100.0, show_default=True),
        click.option("--hysteresis", type=click.FloatRange(min=0, min_open=True), default=1e-6, show_default=True),
    ]):
        f = o(f)
    return f


def _run_summary(tr) -> dict:
    from .sim import drift_metrics, region_sequence

    v = tr.V()
    hit = np.nonzero(v <= 0)[0]
    t_hit = float(tr.t[hit[0]]) if len(hit) else None
    after = float(np.max(v[hit[0]:])) if len(hit) else None
    return {
        "t_reach": t_hit,
        "max_V_after": after,
        "violation": bool(after is not None and after > 1e-6),
        "regions": region_sequence(tr),
        "chattering": tr.chattering,
        **drift_metrics(tr),
    }


@cli.command()
@common
@sim_options
@click.option("--phi", type=float, default=math.pi, show_default=True)
@click.option("--d", "d0", type=click.FloatRange(min=0, min_open=True), default=3.0, show_default=True)
@click.option("--alpha", type=float, default=0.0, show_default=True)
@click.option("--random", "n_random", type=click.IntRange(min=0), default=0,
              help="Simulate this many random starts (seeded) instead.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Trajectory CSV (single start).")
def simulate(phi, d0, alpha, n_random, csv_path, **kw):
    """Simulate the switched controller; exit 1 if V climbs back above 1e-6."""
    from .sim import initial_state, random_starts, simulate_hybrid

    cfg = _sim_cfg(kw)
    starts = random_starts(n_random, kw["seed"]) if n_random else [initial_state(phi, d0, alpha)]
    rep = Report(_command_line(), kw["box"])
    runs, trs = [], []
    t0 = time.perf_counter()
    for x0 in starts:
        tr = simulate_hybrid(None, x0, cfg, on_singular="stop")
        s = _run_summary(tr)
        s["start"] = {"phi": x0["phi"], "d": x0["d"]}
        runs.append(s)
        trs.append(tr)
        reach_s = f"{s['t_reach']:.4f}" if s["t_reach"] is not None else "never"
        click.echo(f"phi0={x0['phi']:.4f} d0={x0['d']:.4f} reach={reach_s} "
                   f"regions={'>'.join(s['regions'])} switches={s['switches']}"
                   f"{' chattering' if s['chattering'] else ''}"
                   f" drift={max(s['max_circle_drift'], s['max_recip_drift']):.2e}")
    rep.timings["simulate"] = time.perf_counter() - t0
    rep.results["runs"] = runs
    if csv_path and len(trs) == 1:
        trs[0].to_csv(csv_path)
        _write(csv_path[:-4] + ".events.json" if csv_path.endswith(".csv") else csv_path + ".events.json",
               json.dumps(trs[0].events_json(), indent=2, sort_keys=True) + "\n")
    _finish(rep, kw, phase_portrait_svg(trs[:5]) if kw["svg_path"] else None)
    return EXIT_DISPROVED if any(r["violation"] for r in runs) else EXIT_OK


@cli.command()
@common
@sim_options
@click.option("--d0", type=click.FloatRange(min=0, min_open=True), default=3.0, show_default=True)
def singular(d0, **kw):
    """Head-on approach along bearing 0 through the polar singularity."""
    from .sim import singular_run

    cfg = _sim_cfg(kw)
    t0 = time.perf_counter()
    tr = singular_run(d0, cfg)
    rep = Report(_command_line(), kw["box"], timings={"singular": time.perf_counter() - t0})
    for ev in tr.events:
        if ev.kind != "switch":
            click.echo(f"t={ev.t:.9f} {ev.kind}: {ev.detail}")
    pre = tr.t <= (tr.events_of("singular-jump")[0].t if tr.events_of("singular-jump") else tr.t[-1])
    d_err = float(np.max(np.abs(tr.col("d")[pre] - (d0 - tr.t[pre]))))
    s = _run_summary(tr)
    s.update({"d0": d0, "max_d_error_pre_jump": d_err, "max_e": float(np.max(tr.col("e"))),
              "events": tr.events_json()["events"] if len(tr.events) < 10_000 else []})
    rep.results["singular"] = s
    click.echo(f"max |d - (d0 - t)| before the jump: {d_err:.2e}; max e {s['max_e']:.3g}; "
               f"final V {float(tr.V()[-1]):.6g}")
    _finish(rep, kw, tr.to_svg() if kw["svg_path"] else None)
    return EXIT_DISPROVED if s["violation"] else EXIT_OK


@cli.command()
@common
@click.option("--grid", type=click.IntRange(min=10), default=500, show_default=True)
def compare(grid, **kw):
    """Compare V <= 0 with the interval-method invariant region."""
    rep = Report(_command_line(), kw["box"])
    budget = _budget(kw)
    rep.add("V<=0 in d<=2", contains(SAFE_SET, parse_set("d <= 2"), kw["box"], budget))
    rep.add("V<=0 in interval region", contains(SAFE_SET, INTERVAL_METHOD_REGION, kw["box"], budget))
    summary = compare_regions(grid)
    svg = summary.pop("svg")
    rep.results["compare"] = summary
    for k, c in rep.certificates.items():
        click.echo(f"{k:<26} {c.verdict}")
    for k in ("fraction_V0_in_interval", "fraction_Vhalf_in_V0", "fraction_Vhalf_in_interval"):
        click.echo(f"{k:<26} {summary[k]:.6f}")
    code = _finish(rep, kw, svg)
    if code == EXIT_OK and summary["fraction_V0_in_interval"] < 1.0:
        return EXIT_DISPROVED
    return code


@cli.command()
@common
@click.option("--grid", type=click.IntRange(min=10), default=500, show_default=True)
def report(grid, **kw):
    """Every certificate of the case study in one JSON report."""
    box, budget = kw["box"], _budget(kw)
    rep = Report(_command_line(), box)
    sysm = station_keeping_model()
    t0 = time.perf_counter()
    rep.results["darboux"] = {}
    for mode in sysm.modes:
        pairs = search(mode.field, 2, 2)
        fis = first_integrals(pairs, mode.field.restrict(("g", "h", "e")))
        rep.results["darboux"][mode.name] = {"pairs": [p.to_json() for p in pairs],
                                             "first_integrals": [f.to_json() for f in fis]}
    rep.timings["darboux"] = time.perf_counter() - t0
    for mode in sysm.modes:
        rep.add(f"di {mode.name}", di_check(V_CST, mode, COHERENCE, box, budget))
    t0 = time.perf_counter()
    chain = run_chain(station_keeping_stages(box), budget)
    if chain.verdict == UNDETERMINED:
        rep.notes.append("reachability undetermined at the requested budget; rerun at budget x10")
        chain = run_chain(station_keeping_stages(box), budget.scaled(10))
    rep.timings["reach"] = time.perf_counter() - t0
    for s in chain.stages:
        for k, c in s.premises.items():
            rep.add(f"{s.stage} {k}", c)
    for i, c in enumerate(chain.links, 1):
        rep.add(f"link {i}", c)
    for c in chain.coverage:
        rep.add(c.claim, c)
    rep.results["time_bounds"] = {s.stage: s.time_bound for s in chain.stages}
    rep.add("V<=0 in interval region", contains(SAFE_SET, INTERVAL_METHOD_REGION, box, budget))
    summary = compare_regions(grid)
    svg = summary.pop("svg")
    rep.results["compare"] = summary
    for k, c in rep.certificates.items():
        click.echo(f"{k:<34} {c.verdict}")
    return _finish(rep, kw, svg)


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="hykeep", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_UNDETERMINED
    if rv is None:
        return EXIT_OK
    return int(rv)


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()

"""Numerical simulation of the switched station-keeping system.

Classical RK4 on a fixed output grid. Each grid step is split into
substeps of length ``theta / L`` where ``L`` is the local relative rate
``max_i |f_i| / max(|x_i|, 1)``; far from the origin ``L*dt < theta`` and
the grid step is taken in one piece. Mode switches are localized by
bisection. After a switch the guard is disarmed until the state leaves the
band ``|2g^2 - 1| <= delta``; a state that drifts across the band edge while
disarmed switches there. This regularizes the sliding motion at the guard
and keeps the switch count finite.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np
from numba import njit

from .dynamics import (
    HybridSystem, VectorField, cartesian_to_polar, polar_state, polar_to_cartesian,
    region_of, station_keeping_model,
)
from .expr import Cos, Expr, Neg, PiConst, PolyLeaf, Product, Quotient, Sin, SqrtConst, Sum
from .poly import Polynomial
from .sets import Atom, SemialgSet, parse_set

__all__ = [
    "SimConfig",
    "Trajectory",
    "Event",
    "NonFinite",
    "SingularApproach",
    "Timeout",
    "integrate_mode",
    "simulate_hybrid",
    "simulate_cartesian",
    "singular_run",
    "time_to_reach",
    "drift_metrics",
    "compile_field",
    "initial_state",
    "random_starts",
]

# kernel status codes
_OK, _NONFINITE, _SINGULAR, _BLOWUP, _EVENT_CAP = 0, 1, 2, 3, 4
# event kind codes
_K_SWITCH_GUARD, _K_SWITCH_BAND, _K_SINGULAR, _K_BLOWUP = 0, 1, 2, 3


class NonFinite(ArithmeticError):
    """The state became NaN or infinite before a threshold triggered."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class SingularApproach(RuntimeError):
    """Distance to the station fell below ``d_min``."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class Timeout(RuntimeError):
    """Target not reached within the horizon."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float = 100.0
    event_tol: float = 1e-10
    hysteresis: float = 1e-6
    d_min: float = 1e-6
    e_max: float = 1e6
    rate_step: float = 0.005
    chatter_rate: float = 1e3
    max_events: int = 5_000_000

    def __post_init__(self):
        for k in ("dt", "horizon", "event_tol", "hysteresis", "d_min", "e_max", "rate_step"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if self.hysteresis > 1e-2:
            raise ValueError("hysteresis band must be small against the guard scale")

    def replace(self, **kw) -> "SimConfig":
        d = asdict(self)
        d.update(kw)
        return SimConfig(**d)


@dataclass
class Event:
    t: float
    kind: str
    detail: str
    state: dict

    def to_json(self) -> dict:
        return {"t": self.t, "kind": self.kind, "detail": self.detail,
                "state": {k: float(v) for k, v in self.state.items()}}


@dataclass
class Trajectory:
    variables: tuple
    t: np.ndarray
    x: np.ndarray
    mode: np.ndarray
    mode_names: tuple
    events: list = field(default_factory=list)
    blowup: bool = False
    singular: bool = False
    chattering: bool = False
    notes: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def col(self, v: str) -> np.ndarray:
        return self.x[:, self.variables.index(v)]

    def state(self, i: int) -> dict:
        return {v: float(self.x[i, j]) for j, v in enumerate(self.variables)}

    @property
    def samples(self):
        for i in range(len(self.t)):
            yield float(self.t[i]), self.state(i), self.mode_names[int(self.mode[i])]

    def final_state(self) -> dict:
        return self.state(len(self.t) - 1)

    def V(self) -> np.ndarray:
        d, h = self.col("d"), self.col("h")
        return d * d + 2 * d * h

    def regions(self) -> list:
        return [region_of(p, d) for p, d in zip(self.col("phi"), self.col("d"))]

    def switch_times(self) -> np.ndarray:
        return np.array([e.t for e in self.events if e.kind == "switch"])

    def events_of(self, kind: str) -> list:
        return [e for e in self.events if e.kind == kind]

    # -- output -------------------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = [v for v in ("g", "h", "e", "d", "phi") if v in self.variables]
        w.writerow(["t", *cols, "mode", "V", "region"])
        V = self.V() if {"d", "h"} <= set(self.variables) else None
        regs = self.regions() if {"d", "phi"} <= set(self.variables) else None
        idx = [self.variables.index(c) for c in cols]
        for i in range(len(self.t)):
            row = [repr(float(self.t[i]))] + [repr(float(self.x[i, j])) for j in idx]
            row.append(self.mode_names[int(self.mode[i])])
            row.append(repr(float(V[i])) if V is not None else "")
            row.append(regs[i] if regs is not None else "")
            w.writerow(row)
        s = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s

    def events_json(self) -> dict:
        return {
            "events": [e.to_json() for e in self.events],
            "blowup": self.blowup,
            "singular": self.singular,
            "chattering": self.chattering,
            "notes": list(self.notes),
        }

    def to_svg(self, path=None, width: int = 720, height: int = 400, d_max: float | None = None) -> str:
        from .figures import phase_portrait_svg

        s = phase_portrait_svg([self], width=width, height=height, d_max=d_max)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s


# ---------------------------------------------------------------------------
# field compilation
# ---------------------------------------------------------------------------

def _src(x, names: dict) -> str:
    if isinstance(x, Polynomial):
        terms = []
        for m, c in x.terms.items():
            f = [repr(float(c))]
            for v, k in m:
                f.append(names[v] if k == 1 else f"{names[v]}**{k}")
            terms.append("*".join(f))
        return "(" + (" + ".join(terms) if terms else "0.0") + ")"
    if isinstance(x, PolyLeaf):
        return _src(x.poly, names)
    if isinstance(x, Sum):
        return "(" + " + ".join(_src(a, names) for a in x.args) + ")"
    if isinstance(x, Product):
        return "(" + " * ".join(_src(a, names) for a in x.args) + ")"
    if isinstance(x, Neg):
        return f"(-{_src(x.arg, names)})"
    if isinstance(x, Quotient):
        return f"({_src(x.num, names)} / {_src(x.den, names)})"
    if isinstance(x, Sin):
        return f"math.sin({names[x.var]})"
    if isinstance(x, Cos):
        return f"math.cos({names[x.var]})"
    if isinstance(x, PiConst):
        return f"({float(x.coef)!r} * math.pi)"
    if isinstance(x, SqrtConst):
        return repr(math.sqrt(float(x.radicand)))
    raise TypeError(f"cannot compile {type(x).__name__}")


_FIELD_CACHE: dict = {}


def compile_field(f: VectorField, variables=None):
    """Numba-compiled ``rhs(x, out)`` for a vector field."""
    variables = tuple(variables or f.variables)
    key = (hash(f), variables)
    fn = _FIELD_CACHE.get(key)
    if fn is not None:
        return fn
    names = {v: f"x{i}" for i, v in enumerate(variables)}
    lines = ["def rhs(x, out):"]
    for i, v in enumerate(variables):
        lines.append(f"    x{i} = x[{i}]")
    for i, v in enumerate(variables):
        rhs = f[v] if v in f else Polynomial()
        lines.append(f"    out[{i}] = {_src(rhs, names)}")
    ns = {"math": math}
    exec("\n".join(lines), ns)
    fn = njit(ns["rhs"])
    _FIELD_CACHE[key] = fn
    return fn


# guard and distance functions; indices are fixed by the model layouts


@njit
def _sigma_poly(x):
    g = x[0]
    return 2.0 * g * abs(g) - 1.0


@njit
def _dist_poly(x):
    return x[3]


@njit
def _sigma_none(x):
    return -1.0


@njit
def _dist_none(x):
    return np.inf


@njit
def _cart_cosphi(x):
    d = math.hypot(x[0], x[1])
    return -(x[0] * math.cos(x[2]) + x[1] * math.sin(x[2])) / d


@njit
def _sigma_cart(x):
    c = _cart_cosphi(x)
    return 2.0 * c * abs(c) - 1.0


@njit
def _dist_cart(x):
    return math.hypot(x[0], x[1])


@njit
def _rhs_cart_const(x, out):
    out[0] = math.cos(x[2])
    out[1] = math.sin(x[2])
    out[2] = 1.0


@njit
def _rhs_cart_prop(x, out):
    d = math.hypot(x[0], x[1])
    out[0] = math.cos(x[2])
    out[1] = math.sin(x[2])
    # u = -sin(phi) with phi = theta - alpha + pi
    out[2] = (x[0] * math.sin(x[2]) - x[1] * math.cos(x[2])) / d


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit
def _advance(rhs, dist, x, h, theta, e_max, d_min):
    """Integrate over time h. Status 0 ok, 1 non-finite, 2 threshold hit."""
    n = x.shape[0]
    y = x.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    rem = h
    while rem > 0.0:
        rhs(y, k1)
        L = 1.0
        for i in range(n):
            s = abs(k1[i]) / max(abs(y[i]), 1.0)
            if s > L:
                L = s
        hs = theta / L
        if hs >= rem or rem - hs < 1e-12 * h:
            hs = rem
        for i in range(n):
            tmp[i] = y[i] + 0.5 * hs * k1[i]
        rhs(tmp, k2)
        for i in range(n):
            tmp[i] = y[i] + 0.5 * hs * k2[i]
        rhs(tmp, k3)
        for i in range(n):
            tmp[i] = y[i] + hs * k3[i]
        rhs(tmp, k4)
        for i in range(n):
            y[i] = y[i] + hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        rem -= hs
        big = 0.0
        for i in range(n):
            if not math.isfinite(y[i]):
                return y, 1
            if abs(y[i]) > big:
                big = abs(y[i])
        if big > e_max or dist(y) < d_min:
            return y, 2
    return y, 0


@njit
def _threshold(y, dist, e_max, d_min):
    big = 0.0
    for i in range(y.shape[0]):
        if abs(y[i]) > big:
            big = abs(y[i])
    return big > e_max or dist(y) < d_min


@njit
def _grow(a, n):
    shape = (max(2 * a.shape[0], n),) + a.shape[1:]
    b = np.empty(shape, dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit
def _kernel(rhs0, rhs1, sigma, dist, x0, t0, T, dt, delta, tol, theta, e_max, d_min, max_events, mode0):
    n = x0.shape[0]
    cap = int((T - t0) / dt) + 1024
    ts = np.empty(cap)
    xs = np.empty((cap, n))
    ms = np.empty(cap, dtype=np.int8)
    ecap = 1024
    et = np.empty(ecap)
    ek = np.empty(ecap, dtype=np.int8)
    ei = np.empty(ecap, dtype=np.int64)
    x = x0.copy()
    t = t0
    s0 = sigma(x)
    if mode0 >= 0:
        mode = mode0
    else:
        mode = 1 if s0 > 0.0 else 0
    armed = abs(s0) > delta
    ns = 0
    ne = 0
    ts[0] = t
    xs[0] = x
    ms[0] = mode
    ns = 1
    status = 0
    k = 0
    while True:
        t_next = t0 + (k + 1) * dt
        if t_next > T:
            t_next = T
        if t >= t_next:
            if t_next >= T:
                break
            k += 1
            continue
        h = t_next - t
        if mode == 0:
            y, st = _advance(rhs0, dist, x, h, theta, e_max, d_min)
        else:
            y, st = _advance(rhs1, dist, x, h, theta, e_max, d_min)
        if st == 1:
            status = 1
            break
        hit = st == 2 or _threshold(y, dist, e_max, d_min)
        if hit:
            lo = 0.0
            hi = h
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if mode == 0:
                    z, s2 = _advance(rhs0, dist, x, mid, theta, e_max, d_min)
                else:
                    z, s2 = _advance(rhs1, dist, x, mid, theta, e_max, d_min)
                if s2 != 0 or _threshold(z, dist, e_max, d_min):
                    hi = mid
                else:
                    lo = mid
            if mode == 0:
                z, s2 = _advance(rhs0, dist, x, hi, theta, e_max, d_min)
            else:
                z, s2 = _advance(rhs1, dist, x, hi, theta, e_max, d_min)
            if s2 == 1:
                status = 1
                break
            t = t + hi
            if ns >= ts.shape[0]:
                ts = _grow(ts, ns + 1)
                xs = _grow(xs, ns + 1)
                ms = _grow(ms, ns + 1)
            if t <= ts[ns - 1]:
                t = np.nextafter(ts[ns - 1], np.inf)
            ts[ns] = t
            xs[ns] = z
            ms[ns] = mode
            ns += 1
            if ne >= et.shape[0]:
                et = _grow(et, ne + 1)
                ek = _grow(ek, ne + 1)
                ei = _grow(ei, ne + 1)
            et[ne] = t
            ek[ne] = _K_SINGULAR if dist(z) < 2.0 * d_min else _K_BLOWUP
            ei[ne] = ns - 1
            ne += 1
            status = 2 if dist(z) < 2.0 * d_min else 3
            break
        sy = sigma(y)
        if mode == 0:
            level = 0.0 if armed else delta
            trig = sy > level
        else:
            level = 0.0 if armed else -delta
            trig = sy <= level
        if trig:
            lo = 0.0
            hi = h
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if mode == 0:
                    z, s2 = _advance(rhs0, dist, x, mid, theta, e_max, d_min)
                    c = sigma(z) > level
                else:
                    z, s2 = _advance(rhs1, dist, x, mid, theta, e_max, d_min)
                    c = sigma(z) <= level
                if c:
                    hi = mid
                else:
                    lo = mid
            if mode == 0:
                z, s2 = _advance(rhs0, dist, x, hi, theta, e_max, d_min)
            else:
                z, s2 = _advance(rhs1, dist, x, hi, theta, e_max, d_min)
            x = z
            t = t + hi
            mode = 1 - mode
            if ns >= ts.shape[0]:
                ts = _grow(ts, ns + 1)
                xs = _grow(xs, ns + 1)
                ms = _grow(ms, ns + 1)
            if t <= ts[ns - 1]:
                t = np.nextafter(ts[ns - 1], np.inf)
            ts[ns] = t
            xs[ns] = x
            ms[ns] = mode
            ns += 1
            if ne >= et.shape[0]:
                et = _grow(et, ne + 1)
                ek = _grow(ek, ne + 1)
                ei = _grow(ei, ne + 1)
            et[ne] = t
            ek[ne] = _K_SWITCH_GUARD if level == 0.0 else _K_SWITCH_BAND
            ei[ne] = ns - 1
            ne += 1
            armed = False
            if ne >= max_events:
                status = 4
                break
            continue
        x = y
        t = t_next
        k += 1
        if ns >= ts.shape[0]:
            ts = _grow(ts, ns + 1)
            xs = _grow(xs, ns + 1)
            ms = _grow(ms, ns + 1)
        ts[ns] = t
        xs[ns] = x
        ms[ns] = mode
        ns += 1
        if abs(sy) > delta:
            armed = True
        if t >= T:
            break
    return ts[:ns], xs[:ns], ms[:ns], et[:ne], ek[:ne], ei[:ne], status


def _advance_py(rhs, dist, x, h, cfg: SimConfig):
    y, st = _advance(rhs, dist, np.asarray(x, dtype=float), float(h), cfg.rate_step, cfg.e_max, cfg.d_min)
    return y


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

_KIND = {
    _K_SWITCH_GUARD: ("switch", "guard"),
    _K_SWITCH_BAND: ("switch", "band edge"),
    _K_SINGULAR: ("blowup-stop", "singular approach"),
    _K_BLOWUP: ("blowup-stop", "state magnitude above e_max"),
}


def _run(rhs0, rhs1, sigma, dist, variables, mode_names, x0, cfg: SimConfig, t0=0.0, mode0=-1):
    x0 = np.array([float(x0[v]) for v in variables]) if isinstance(x0, Mapping) else np.asarray(x0, float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")
    ts, xs, ms, et, ek, ei, status = _kernel(
        rhs0, rhs1, sigma, dist, x0, float(t0), float(t0 + cfg.horizon), cfg.dt, cfg.hysteresis,
        cfg.event_tol, cfg.rate_step, cfg.e_max, cfg.d_min, cfg.max_events, mode0,
    )
    tr = Trajectory(tuple(variables), ts.copy(), xs.copy(), ms.copy(), tuple(mode_names))
    for t, kcode, i in zip(et, ek, ei):
        kind, detail = _KIND[int(kcode)]
        if kind == "switch":
            detail = f"{mode_names[int(ms[i - 1])]}->{mode_names[int(ms[i])]} ({detail})"
        tr.events.append(Event(float(t), kind, detail, tr.state(int(i))))
    if status == _NONFINITE:
        raise NonFinite(f"non-finite state after t={ts[-1]:.6g}", tr)
    if status == _SINGULAR:
        tr.singular = True
        tr.blowup = True
    elif status == _BLOWUP:
        tr.blowup = True
    elif status == _EVENT_CAP:
        tr.notes.append(f"stopped after {cfg.max_events} switch events")
    tr.chattering = _chattering(tr.switch_times(), cfg.chatter_rate)
    return tr


def _chattering(st: np.ndarray, rate: float) -> bool:
    """More than ``rate`` switches inside some window of one simulated second."""
    if len(st) <= rate:
        return False
    k = int(rate)
    return bool(np.any(st[k:] - st[:-k] <= 1.0))


def initial_state(phi: float, d: float, alpha: float = 0.0, with_alpha: bool = True) -> dict:
    return polar_state(phi, d, alpha if with_alpha else None)


def random_starts(n: int, seed: int = 0, d_max: float = 10.0) -> list:
    """``n`` coherent states with phi in (0, 2 pi) and d in (0, d_max]."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        u, v = rng.random(2)
        phi, d = 2 * math.pi * u, d_max * (1.0 - v)
        if phi > 0:
            out.append(initial_state(phi, d))
    return out


def integrate_mode(f: VectorField, x0: Mapping, cfg: SimConfig | None = None,
                   stop: Callable[[dict], bool] | None = None) -> Trajectory:
    """Integrate one vector field; optional stop predicate localized by bisection."""
    cfg = cfg or SimConfig()
    vars_ = tuple(f.variables)
    rhs = compile_field(f, vars_)
    tr = _run(rhs, rhs, _sigma_none, _dist_none, vars_, ("flow",), x0, cfg)
    if stop is not None:
        _truncate_at(tr, stop, lambda m: rhs, _dist_none, cfg)
    return tr


def _truncate_at(tr: Trajectory, pred, rhs_of, dist, cfg: SimConfig, kind="region-entry", detail="stop") -> bool:
    """Cut the trajectory at the first time pred holds; returns True if it does."""
    hits = [i for i in range(len(tr.t)) if pred(tr.state(i))]
    if not hits:
        return False
    i = hits[0]
    if i == 0:
        tr.t, tr.x, tr.mode = tr.t[:1], tr.x[:1], tr.mode[:1]
        return True
    x_prev, t_prev = tr.x[i - 1], tr.t[i - 1]
    rhs = rhs_of(int(tr.mode[i - 1]))
    lo, hi = 0.0, float(tr.t[i] - t_prev)
    while hi - lo > cfg.event_tol:
        mid = 0.5 * (lo + hi)
        z = _advance_py(rhs, dist, x_prev, mid, cfg)
        if pred(dict(zip(tr.variables, z))):
            hi = mid
        else:
            lo = mid
    z = _advance_py(rhs, dist, x_prev, hi, cfg)
    t_hit = float(t_prev + hi)
    tr.t = np.append(tr.t[:i], t_hit)
    tr.x = np.vstack([tr.x[:i], z[None, :]])
    tr.mode = np.append(tr.mode[:i], tr.mode[i - 1])
    tr.events = [e for e in tr.events if e.t < t_hit]
    tr.events.append(Event(t_hit, kind, detail, dict(zip(tr.variables, map(float, z)))))
    return True


# ---------------------------------------------------------------------------
# the switched system
# ---------------------------------------------------------------------------

_SYS_CACHE: dict = {}


def _compiled_system(sys: HybridSystem):
    key = sys.fingerprint()
    c = _SYS_CACHE.get(key)
    if c is None:
        vars_ = tuple(sys.variables)
        if vars_[:4] != ("g", "h", "e", "d"):
            raise ValueError("state layout must start with g, h, e, d")
        const, prop = sys.mode("constant"), sys.mode("proportional")
        c = (compile_field(const.field, vars_), compile_field(prop.field, vars_), vars_)
        _SYS_CACHE[key] = c
    return c


def simulate_hybrid(sys: HybridSystem | None, x0: Mapping, cfg: SimConfig | None = None,
                    on_singular: str = "raise", t0: float = 0.0) -> Trajectory:
    """Simulate the two-mode system with hysteresis switching.

    ``on_singular`` is ``"raise"`` (SingularApproach carries the partial
    trajectory) or ``"stop"`` (return it flagged).
    """
    cfg = cfg or SimConfig()
    sys = sys or station_keeping_model(with_alpha=True)
    rhs0, rhs1, vars_ = _compiled_system(sys)
    x0 = dict(x0)
    circle = x0["g"] ** 2 + x0["h"] ** 2 - 1
    recip = x0["e"] * x0["d"] - 1
    if abs(circle) > 1e-12 or abs(recip) > 1e-12 or not x0["d"] > 0:
        raise ValueError("initial state is not coherent")
    x0.setdefault("alpha", 0.0)
    tr = _run(rhs0, rhs1, _sigma_poly, _dist_poly, vars_, ("constant", "proportional"), x0, cfg, t0)
    _add_region_events(tr, (rhs0, rhs1), cfg)
    if tr.singular and on_singular == "raise":
        raise SingularApproach(f"d < {cfg.d_min} at t={tr.t[-1]:.9g}", tr)
    return tr


def _add_region_events(tr: Trajectory, rhss, cfg: SimConfig):
    labels = tr.regions()
    last = labels[0]
    new = []
    for i in range(1, len(labels)):
        lab = labels[i]
        if lab == "R0" or lab == last:
            continue
        # localize the change inside (t[i-1], t[i]]
        x_prev, t_prev = tr.x[i - 1], tr.t[i - 1]
        rhs = rhss[int(tr.mode[i - 1])]
        lo, hi = 0.0, float(tr.t[i] - t_prev)
        vi, pi_ = tr.variables.index("d"), tr.variables.index("phi")
        while hi - lo > cfg.event_tol:
            mid = 0.5 * (lo + hi)
            z = _advance_py(rhs, _dist_poly, x_prev, mid, cfg)
            r = region_of(z[pi_], z[vi])
            if r != last and r != "R0":
                hi = mid
            else:
                lo = mid
        z = _advance_py(rhs, _dist_poly, x_prev, hi, cfg)
        new.append(Event(float(t_prev + hi), "region-entry", f"{last}->{lab}", dict(zip(tr.variables, map(float, z)))))
        last = lab
    tr.events = sorted(tr.events + new, key=lambda e: e.t)


def region_sequence(tr: Trajectory) -> list:
    seq = [tr.regions()[0]]
    for e in tr.events_of("region-entry"):
        seq.append(e.detail.split("->")[1])
    return seq


def simulate_cartesian(pose, cfg: SimConfig | None = None, switched: bool = True) -> Trajectory:
    """Unit-speed vehicle in ``(x, y, theta)`` under the same switching law.

    With ``switched`` false the vehicle turns at constant unit rate.
    """
    cfg = cfg or SimConfig()
    x0 = np.asarray(pose, dtype=float)
    sigma = _sigma_cart if switched else _sigma_none
    tr = _run(_rhs_cart_const, _rhs_cart_prop, sigma, _dist_cart, ("x", "y", "theta"),
              ("constant", "proportional"), x0, cfg)
    return tr


def cartesian_polar_columns(tr: Trajectory) -> tuple:
    """(d, phi) along a Cartesian trajectory, phi in [0, 2 pi)."""
    x, y, th = tr.col("x"), tr.col("y"), tr.col("theta")
    d = np.hypot(x, y)
    alpha = np.arctan2(y, x)
    phi = np.mod(th - alpha + np.pi, 2 * np.pi)
    return d, phi


# ---------------------------------------------------------------------------
# singular run
# ---------------------------------------------------------------------------

def singular_run(d0: float, cfg: SimConfig | None = None, sys: HybridSystem | None = None) -> Trajectory:
    """Head straight at the station from bearing 0, jump at the singularity.

    At ``d < d_min`` the bearing is set to ``pi`` (``g = -1, h = 0``), ``d`` is
    kept and ``e = 1/d``; the simulation then continues for the rest of the
    horizon.
    """
    if not d0 > 0:
        raise ValueError("d0 must be positive")
    cfg = cfg or SimConfig()
    sys = sys or station_keeping_model(with_alpha=True)
    x0 = {"g": 1.0, "h": 0.0, "e": 1.0 / d0, "d": d0, "phi": 0.0, "alpha": 0.0}
    first = simulate_hybrid(sys, x0, cfg, on_singular="stop")
    if not first.singular:
        first.notes.append("no singular approach within the horizon")
        return first
    t_jump = float(first.t[-1])
    pre = first.final_state()
    phi = pre["phi"] - math.fmod(pre["phi"], 2 * math.pi) + math.pi
    post = dict(pre, g=-1.0, h=0.0, phi=phi, e=1.0 / pre["d"])
    rest = max(cfg.horizon - t_jump, cfg.dt)
    second = simulate_hybrid(sys, post, cfg.replace(horizon=rest), on_singular="stop", t0=t_jump)
    jump = Event(t_jump, "singular-jump", f"phi {pre['phi']:.6g} -> {phi:.6g}; d kept at {pre['d']:.3g}", post)
    tr = Trajectory(
        first.variables,
        np.concatenate([first.t, second.t[1:]]),
        np.vstack([first.x, second.x[1:]]),
        np.concatenate([first.mode, second.mode[1:]]),
        first.mode_names,
        events=first.events + [jump] + second.events,
        blowup=True,
        singular=second.singular,
        chattering=first.chattering or second.chattering,
    )
    # the jump is a discontinuity at one instant; keep both states
    tr.t = np.concatenate([first.t, [np.nextafter(t_jump, np.inf)], second.t[1:]])
    tr.x = np.vstack([first.x, np.array([[post[v] for v in first.variables]]), second.x[1:]])
    tr.mode = np.concatenate([first.mode, [second.mode[0]], second.mode[1:]])
    tr.notes.append("post-jump d is the pre-jump value")
    return tr


# ---------------------------------------------------------------------------
# reachability and diagnostics
# ---------------------------------------------------------------------------

def _vec_eval(x, cols: Mapping[str, np.ndarray]):
    if isinstance(x, PolyLeaf):
        x = x.poly
    if isinstance(x, Polynomial):
        n = len(next(iter(cols.values())))
        out = np.zeros(n)
        for m, c in x.terms.items():
            t = np.full(n, float(c))
            for v, k in m:
                t = t * cols[v] ** k
            out = out + t
        return out
    if isinstance(x, Sum):
        return sum(_vec_eval(a, cols) for a in x.args)
    if isinstance(x, Product):
        out = 1.0
        for a in x.args:
            out = out * _vec_eval(a, cols)
        return out
    if isinstance(x, Neg):
        return -_vec_eval(x.arg, cols)
    if isinstance(x, Quotient):
        return _vec_eval(x.num, cols) / _vec_eval(x.den, cols)
    if isinstance(x, Sin):
        return np.sin(cols[x.var])
    if isinstance(x, Cos):
        return np.cos(cols[x.var])
    if isinstance(x, PiConst):
        return float(x.coef) * math.pi
    if isinstance(x, SqrtConst):
        return math.sqrt(float(x.radicand))
    raise TypeError(type(x).__name__)


def set_mask(s: SemialgSet, cols: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorized membership of sample columns in a set."""
    from .sets import And, Const, Not, Or

    if isinstance(s, Const):
        return np.full(len(next(iter(cols.values()))), s.value)
    if isinstance(s, Atom):
        v = _vec_eval(s.expr, cols)
        v = np.broadcast_to(v, (len(next(iter(cols.values()))),))
        return v < 0 if s.rel == "<" else (v <= 0 if s.rel == "<=" else v == 0)
    if isinstance(s, And):
        out = set_mask(s.args[0], cols)
        for a in s.args[1:]:
            out = out & set_mask(a, cols)
        return out
    if isinstance(s, Or):
        out = set_mask(s.args[0], cols)
        for a in s.args[1:]:
            out = out | set_mask(a, cols)
        return out
    if isinstance(s, Not):
        return ~set_mask(s.arg, cols)
    raise TypeError(type(s).__name__)


def time_to_reach(sys: HybridSystem | None, x0: Mapping, target, cfg: SimConfig | None = None) -> float:
    """First time the target holds, localized by bisection; Timeout otherwise."""
    cfg = cfg or SimConfig()
    sys = sys or station_keeping_model(with_alpha=True)
    target = parse_set(target) if isinstance(target, str) else target
    if target.contains_point(x0, "float"):
        return 0.0
    tr = simulate_hybrid(sys, x0, cfg, on_singular="stop")
    cols = {v: tr.col(v) for v in tr.variables}
    mask = set_mask(target, cols)
    idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        raise Timeout(f"target not reached within {cfg.horizon} s", tr)
    i = int(idx[0])
    rhs0, rhs1, _ = _compiled_system(sys)
    rhs = (rhs0, rhs1)[int(tr.mode[i - 1])]
    lo, hi = 0.0, float(tr.t[i] - tr.t[i - 1])
    while hi - lo > cfg.event_tol:
        mid = 0.5 * (lo + hi)
        z = _advance_py(rhs, _dist_poly, tr.x[i - 1], mid, cfg)
        if target.contains_point(dict(zip(tr.variables, map(float, z))), "float"):
            hi = mid
        else:
            lo = mid
    return float(tr.t[i - 1] + hi)


def drift_metrics(tr: Trajectory) -> dict:
    g, h, e, d = (tr.col(v) for v in ("g", "h", "e", "d"))
    return {
        "max_circle_drift": float(np.max(np.abs(g * g + h * h - 1))),
        "max_recip_drift": float(np.max(np.abs(d * e - 1))),
        "switches": len(tr.events_of("switch")),
        "min_d": float(np.min(d)),
    }

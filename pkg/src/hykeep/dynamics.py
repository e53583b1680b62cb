"""Vector fields, control modes and the station-keeping models.

State of the polynomial model: ``g = cos(phi)``, ``h = sin(phi)``,
``e = 1/d``, ``d`` and ``phi``; optionally the position angle ``alpha``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

from .expr import Cos, Expr, PolyLeaf, Sin, expr_lie, parse_expr, to_expr
from .poly import Polynomial, lie_derivative
from .sets import SemialgSet, parse_set

__all__ = [
    "VectorField",
    "Mode",
    "HybridSystem",
    "plant_field",
    "station_keeping_model",
    "cartesian_model",
    "polar_model",
    "mode_vector_field",
    "model_to_json",
    "model_from_json",
    "V_CST",
    "V_CST_RATIONAL",
    "COHERENCE",
    "CONSTANT_DOMAIN",
    "PROPORTIONAL_DOMAIN",
    "regions",
    "polar_state",
    "polar_to_cartesian",
    "cartesian_to_polar",
]

STATE_VARS = ("g", "h", "e", "d", "phi")

V_CST = Polynomial.parse("d^2 + 2*d*h")
V_CST_RATIONAL = parse_expr("(1 + 2*e*h)/e^2")

COHERENCE = parse_set("g^2 + h^2 = 1 & e*d = 1 & d > 0")
# 2g <= sqrt(2) written without the square root
CONSTANT_DOMAIN = parse_set("d > 0 & (g <= 0 | 2*g^2 <= 1)")
PROPORTIONAL_DOMAIN = parse_set("d > 0 & g > 0 & 2*g^2 > 1")


class VectorField:
    """Map from state symbol to its time derivative.

    Right-hand sides are :class:`Polynomial` for the algebraic models and
    :class:`Expr` for the trigonometric ones (Cartesian, polar).
    """

    __slots__ = ("_rhs",)

    def __init__(self, rhs: Mapping[str, object]):
        clean = {}
        for v, f in rhs.items():
            if isinstance(f, str):
                f = parse_expr(f)
                if f.is_polynomial():
                    f = f.as_polynomial()
            elif isinstance(f, (int,)):
                f = Polynomial.const(f)
            elif isinstance(f, PolyLeaf):
                f = f.poly
            clean[v] = f
        self._rhs = clean

    @property
    def variables(self) -> tuple:
        return tuple(self._rhs)

    def __getitem__(self, v):
        return self._rhs[v]

    def __contains__(self, v):
        return v in self._rhs

    def __iter__(self):
        return iter(self._rhs)

    def __len__(self):
        return len(self._rhs)

    def items(self):
        return self._rhs.items()

    def is_polynomial(self) -> bool:
        return all(isinstance(f, Polynomial) for f in self._rhs.values())

    def polynomials(self) -> dict:
        if not self.is_polynomial():
            raise TypeError("field has non-polynomial components")
        return dict(self._rhs)

    def restrict(self, vars_) -> "VectorField":
        """Sub-field on ``vars_``; the sub-system must be closed."""
        vars_ = tuple(vars_)
        for v in vars_:
            f = self._rhs[v]
            syms = f.variables if isinstance(f, Polynomial) else f.free_symbols()
            extra = set(syms) - set(vars_)
            if extra:
                raise ValueError(f"d{v}/dt depends on {sorted(extra)} outside {vars_}")
        return VectorField({v: self._rhs[v] for v in vars_})

    def lie(self, p):
        if isinstance(p, Polynomial) and self.is_polynomial():
            return lie_derivative(p, self._rhs)
        return expr_lie(to_expr(p), self.polynomials())

    def evaluate(self, point: Mapping[str, object], mode: str | None = None) -> dict:
        out = {}
        for v, f in self._rhs.items():
            if isinstance(f, Polynomial):
                out[v] = f.evaluate(point) if mode != "float" else f.float_value(point)
            else:
                out[v] = f.evaluate(point, mode)
        return out

    def to_strings(self) -> dict:
        return {v: str(f) for v, f in self._rhs.items()}

    def __eq__(self, other):
        return isinstance(other, VectorField) and self._rhs == other._rhs

    def __hash__(self):
        return hash(tuple(sorted((v, str(f)) for v, f in self._rhs.items())))

    def __repr__(self):
        body = ", ".join(f"{v}' = {f}" for v, f in self._rhs.items())
        return f"VectorField({body})"


@dataclass(frozen=True)
class Mode:
    name: str
    control: Polynomial
    field: VectorField
    domain: SemialgSet


@dataclass(frozen=True)
class HybridSystem:
    modes: tuple
    coherence: SemialgSet
    variables: tuple = STATE_VARS
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def mode(self, name: str) -> Mode:
        for m in self.modes:
            if m.name == name:
                return m
        raise KeyError(name)

    def active_mode(self, point: Mapping[str, float]) -> Mode:
        for m in self.modes:
            if m.domain.contains_point(point, "float"):
                return m
        raise ValueError(f"no mode domain contains {dict(point)}")

    def fingerprint(self) -> str:
        blob = json.dumps(model_to_json(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def plant_field(u, with_alpha: bool = False) -> VectorField:
    """Polynomial plant with the control ``u`` substituted."""
    u = Polynomial.coerce(u)
    g, h, e = Polynomial.var("g"), Polynomial.var("h"), Polynomial.var("e")
    turn = h * e + u
    rhs = {
        "g": -turn * h,
        "h": turn * g,
        "e": g * e * e,
        "d": -g,
        "phi": turn,
    }
    if with_alpha:
        rhs["alpha"] = -h * e
    return VectorField(rhs)


def station_keeping_model(with_alpha: bool = False) -> HybridSystem:
    const = Mode("constant", Polynomial.const(1), plant_field(1, with_alpha), CONSTANT_DOMAIN)
    prop = Mode("proportional", -Polynomial.var("h"), plant_field("-h", with_alpha), PROPORTIONAL_DOMAIN)
    vars_ = STATE_VARS + (("alpha",) if with_alpha else ())
    return HybridSystem((const, prop), COHERENCE, vars_)


def mode_vector_field(m: Mode) -> VectorField:
    return m.field


def cartesian_model(u=1) -> VectorField:
    """Unit-speed Dubins kinematics in ``(x, y, theta)``."""
    return VectorField({"x": Cos("theta"), "y": Sin("theta"), "theta": to_expr(u)})


def polar_model(u=1) -> VectorField:
    """Unit-speed kinematics in ``(d, phi, alpha)``."""
    return VectorField({
        "d": -Cos("phi"),
        "phi": Sin("phi") / PolyLeaf(Polynomial.var("d")) + to_expr(u),
        "alpha": -Sin("phi") / PolyLeaf(Polynomial.var("d")),
    })


# ---------------------------------------------------------------------------
# regions of the phase portrait (phi in [0, 2 pi), V in polynomial form)
# ---------------------------------------------------------------------------

def regions() -> dict:
    v = "d^2 + 2*d*h"
    return {
        "R1": parse_set("0 < phi & phi < pi/4 & d > 0"),
        "R2": parse_set(f"pi/4 <= phi & phi <= 7*pi/4 & d > 0 & {v} > 0"),
        "R3": parse_set(f"7*pi/4 < phi & phi < 2*pi & d > 0 & {v} > 0"),
        "R4": parse_set(f"{v} <= 0"),
    }


def region_of(phi: float, d: float) -> str:
    """Label of the region containing the polar point; phi is wrapped."""
    ph = math.fmod(phi, 2 * math.pi)
    if ph < 0:
        ph += 2 * math.pi
    V = d * d + 2 * d * math.sin(ph)
    if V <= 0:
        return "R4"
    if 0 < ph < math.pi / 4:
        return "R1"
    if math.pi / 4 <= ph <= 7 * math.pi / 4:
        return "R2"
    if ph > 7 * math.pi / 4:
        return "R3"
    return "R0"  # the phi = 0 ray


# ---------------------------------------------------------------------------
# coordinate maps
# ---------------------------------------------------------------------------

def polar_state(phi: float, d: float, alpha: float | None = None) -> dict:
    """Coherent polynomial-model state for a polar pose."""
    s = {"g": math.cos(phi), "h": math.sin(phi), "e": 1.0 / d, "d": d, "phi": phi}
    if alpha is not None:
        s["alpha"] = alpha
    return s


def polar_to_cartesian(d: float, phi: float, alpha: float) -> tuple:
    theta = phi + alpha - math.pi
    return d * math.cos(alpha), d * math.sin(alpha), theta


def cartesian_to_polar(x: float, y: float, theta: float) -> tuple:
    d = math.hypot(x, y)
    alpha = math.atan2(y, x)
    phi = theta - alpha + math.pi
    return d, phi, alpha


# ---------------------------------------------------------------------------
# JSON model format
# ---------------------------------------------------------------------------

def model_to_json(sys: HybridSystem) -> dict:
    return {
        "variables": list(sys.variables),
        "modes": [
            {
                "name": m.name,
                "control": str(m.control),
                "field": m.field.to_strings(),
                "domain": str(m.domain),
            }
            for m in sys.modes
        ],
        "coherence": str(sys.coherence),
    }


def model_from_json(obj) -> HybridSystem:
    if isinstance(obj, str):
        obj = json.loads(obj)
    modes = []
    for m in obj["modes"]:
        fld = VectorField({v: Polynomial.parse(s) for v, s in m["field"].items()})
        modes.append(Mode(m["name"], Polynomial.parse(m["control"]), fld, parse_set(m["domain"])))
    return HybridSystem(tuple(modes), parse_set(obj["coherence"]), tuple(obj["variables"]))

import json
import math

from hypothesis import given, strategies as st

from hykeep.dynamics import (
    COHERENCE, CONSTANT_DOMAIN, PROPORTIONAL_DOMAIN, cartesian_model, cartesian_to_polar,
    mode_vector_field, model_from_json, model_to_json, polar_state, polar_to_cartesian,
    region_of, station_keeping_model,
)
from hykeep.poly import Polynomial, lie_derivative

P = Polynomial.parse


def test_model_shape(model):
    assert len(model.modes) == 2
    assert model.mode("constant").field["e"] == P("g*e^2")
    assert model.mode("proportional").field["h"] == P("(h*e - h)*g")


def test_mode_fields(model):
    const, prop = (mode_vector_field(m) for m in model.modes)
    assert const["phi"] == P("h*e + 1")
    assert prop["phi"] == P("h*e - h")
    assert prop["g"] == -P("h*e - h") * P("h")


def test_cartesian_model():
    f = cartesian_model(1)
    assert f["theta"].evaluate({}) == 1
    v = f.evaluate({"x": 0.0, "y": 0.0, "theta": 0.0}, "float")
    assert (v["x"], v["y"]) == (1.0, 0.0)
    f0 = cartesian_model(0)
    assert f0["theta"].evaluate({}) == 0


def test_coherence_preserved_symbolically(model):
    for m in model.modes:
        f = m.field.polynomials()
        assert lie_derivative(P("g^2 + h^2 - 1"), f).is_zero()
        assert lie_derivative(P("d*e - 1"), f) == P("g*e") * P("d*e - 1")


def test_json_round_trip(model):
    back = model_from_json(json.dumps(model_to_json(model)))
    assert back == model
    assert back.fingerprint() == model.fingerprint()


def test_region_labels():
    assert region_of(math.pi / 8, 5) == "R1"
    assert region_of(math.pi, 5) == "R2"
    assert region_of(15 * math.pi / 8, 5) == "R3"
    assert region_of(3 * math.pi / 2, 1) == "R4"
    assert region_of(3 * math.pi / 2 + 4 * math.pi, 1) == "R4"
    assert region_of(0.0, 5) == "R0"


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(1e-3, 100))
def test_guard_partition(g, h, d):
    pt = {"g": g, "h": h, "d": d}
    a = CONSTANT_DOMAIN.contains_point(pt, "float")
    b = PROPORTIONAL_DOMAIN.contains_point(pt, "float")
    assert a != b


@given(st.floats(1e-3, 50), st.floats(0, 2 * math.pi), st.floats(-math.pi, math.pi))
def test_polar_cartesian_round_trip(d, phi, alpha):
    x, y, th = polar_to_cartesian(d, phi, alpha)
    d2, phi2, _ = cartesian_to_polar(x, y, th)
    assert abs(d2 - d) <= 1e-12 * max(1.0, d)
    dphi = math.remainder(phi2 - phi, 2 * math.pi)
    assert abs(dphi) <= 1e-12 * max(1.0, d)


@given(st.floats(1e-3, 50), st.floats(0, 2 * math.pi))
def test_polar_state_coherent(d, phi):
    s = polar_state(phi, d)
    assert abs(s["g"] ** 2 + s["h"] ** 2 - 1) < 1e-15
    assert abs(s["e"] * s["d"] - 1) < 1e-15
    assert COHERENCE.free_symbols() <= set(s)

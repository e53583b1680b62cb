import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hykeep.dynamics import plant_field, polar_to_cartesian, region_of
from hykeep.sim import (
    SimConfig, Timeout, cartesian_polar_columns, drift_metrics, initial_state, integrate_mode,
    random_starts, region_sequence, simulate_cartesian, simulate_hybrid, singular_run, time_to_reach,
)

SAFE = "d^2 + 2*d*h <= 0"
F1 = plant_field(1)
T_REACH_PI_3 = 6.499496177613736  # frozen after the Cartesian cross-check below


def _plain(phi, d):
    return initial_state(phi, d, with_alpha=False)


@pytest.fixture(scope="module")
def fig_run():
    return simulate_hybrid(None, initial_state(math.pi, 3.0), SimConfig(horizon=20))


def test_equilibrium_is_fixed():
    x0 = {"g": 0.0, "h": -1.0, "e": 1.0, "d": 1.0, "phi": 3 * math.pi / 2}
    tr = integrate_mode(F1, x0, SimConfig(horizon=10))
    assert np.max(np.abs(tr.x[-1] - tr.x[0])) < 1e-9


def test_unit_circle_in_cartesian():
    cfg = SimConfig(horizon=2 * math.pi)
    tr = simulate_cartesian((0.0, 0.0, 0.0), cfg, switched=False)
    assert tr.t[-1] == pytest.approx(2 * math.pi)
    assert np.max(np.abs(tr.x[-1, :2])) < 1e-6
    assert tr.x[len(tr.t) // 2, 1] == pytest.approx(2.0, abs=1e-3)


def test_constant_mode_has_no_switches():
    tr = integrate_mode(F1, _plain(1.0, 2.0), SimConfig(horizon=10))
    assert drift_metrics(tr)["switches"] == 0


def test_figure_run(fig_run):
    assert region_sequence(fig_run)[:3] == ["R2", "R3", "R4"]
    assert fig_run.chattering
    v = fig_run.V()
    hit = np.nonzero(v <= 0)[0][0]
    assert np.max(v[hit:]) <= 1e-6


def test_figure_run_matches_cartesian(fig_run):
    ct = simulate_cartesian(polar_to_cartesian(3.0, math.pi, 0.0), SimConfig(horizon=20))
    dc, pc = cartesian_polar_columns(ct)
    vc = dc * dc + 2 * dc * np.sin(pc)
    t_cart = ct.t[np.nonzero(vc <= 0)[0][0]]
    assert t_cart == pytest.approx(T_REACH_PI_3, abs=2e-3)
    assert time_to_reach(None, initial_state(math.pi, 3.0), SAFE) == pytest.approx(T_REACH_PI_3, abs=1e-6)


def test_time_to_reach_edges():
    x0 = initial_state(3 * math.pi / 2, 1.0)
    assert time_to_reach(None, x0, SAFE) == 0.0
    with pytest.raises(Timeout):
        time_to_reach(None, initial_state(math.pi, 3.0), "d >= 1000000", SimConfig(horizon=10))


def test_inside_stays_inside():
    tr = simulate_hybrid(None, initial_state(4.0, 1.2), SimConfig(horizon=100))
    assert tr.V()[0] <= 0
    assert np.max(tr.V()) <= 1e-6


def test_region_one_exit_time():
    tr = simulate_hybrid(None, initial_state(math.pi / 8, 5.0), SimConfig(horizon=20))
    exits = [e for e in tr.events_of("region-entry") if e.detail.startswith("R1->")]
    assert exits and exits[0].t <= math.sqrt(2) * 5 * 1.02


def test_singular_run():
    tr = singular_run(3.0)
    jump = tr.events_of("singular-jump")
    assert len(jump) == 1
    tj = jump[0].t
    pre = tr.t <= tj
    assert np.max(np.abs(tr.col("d")[pre] - (3.0 - tr.t[pre]))) < 1e-6
    assert np.max(tr.col("e")[pre]) > 1e5 and tj < 3.0
    post = jump[0].state
    assert math.fmod(post["phi"], 2 * math.pi) == pytest.approx(math.pi)
    assert tr.V()[-1] <= 0


def test_drift_small(fig_run):
    m = drift_metrics(fig_run)
    assert m["max_circle_drift"] < 1e-6 and m["max_recip_drift"] < 1e-6


def test_outputs(fig_run, tmp_path):
    text = fig_run.to_csv(tmp_path / "run.csv")
    assert text.splitlines()[0] == "t,g,h,e,d,phi,mode,V,region"
    assert fig_run.events_json()["chattering"] is True
    assert fig_run.to_svg().startswith("<svg")


def test_incoherent_start_rejected():
    with pytest.raises(ValueError):
        simulate_hybrid(None, {"g": 1.0, "h": 1.0, "e": 1.0, "d": 1.0, "phi": 0.0})


# -- properties -----------------------------------------------------------------

def test_order_four_convergence():
    x0 = _plain(1.0, 2.0)
    ends = [integrate_mode(F1, x0, SimConfig(dt=dt, horizon=1.0, rate_step=100)).x[-1]
            for dt in (0.02, 0.01, 0.02 / 16)]
    e1 = np.max(np.abs(ends[0] - ends[2]))
    e2 = np.max(np.abs(ends[1] - ends[2]))
    assert 12 < e1 / e2 < 20


@settings(max_examples=1000)
@given(st.floats(0.05, 2 * math.pi - 0.05), st.floats(0.2, 10))
def test_constant_mode_conserves_v(phi, d):
    tr = integrate_mode(F1, _plain(phi, d), SimConfig(horizon=10))
    dd, h = tr.col("d"), tr.col("h")
    v = dd * dd + 2 * dd * h
    assert np.max(np.abs(v - v[0])) < 1e-7


@given(st.floats(0.05, 2 * math.pi - 0.05), st.floats(0.5, 8), st.floats(-math.pi, math.pi))
def test_cartesian_polar_agree(phi, d, alpha):
    cfg = SimConfig(horizon=6)
    tr = simulate_hybrid(None, initial_state(phi, d, alpha), cfg, on_singular="stop")
    ct = simulate_cartesian(polar_to_cartesian(d, phi, alpha), cfg)
    dc, pc = cartesian_polar_columns(ct)
    dp = np.interp(ct.t, tr.t, tr.col("d"))
    pp = np.mod(np.interp(ct.t, tr.t, tr.col("phi")), 2 * math.pi)
    ok = (dc > 0.1) & (dp > 0.1) & (ct.t <= tr.t[-1])
    # stop comparing once either run gets close to the station
    first_close = np.nonzero(~ok)[0]
    if len(first_close):
        ok[first_close[0]:] = False
    dphi = np.abs(np.remainder(pp - pc + math.pi, 2 * math.pi) - math.pi)
    assert np.max(np.abs(dp - dc)[ok], initial=0) < 1e-3
    assert np.max(dphi[ok], initial=0) < 1e-3


@settings(max_examples=1000)
@given(st.floats(0, 2 * math.pi, exclude_max=True), st.floats(1e-3, 20), st.integers(-5, 5))
def test_region_label_ignores_winding(phi, d, k):
    assert region_of(phi + 2 * math.pi * k, d) == region_of(phi, d) or abs(math.sin(phi)) < 1e-9


def test_winding_does_not_change_switching():
    a = simulate_hybrid(None, initial_state(math.pi, 3.0), SimConfig(horizon=10))
    b = simulate_hybrid(None, initial_state(math.pi + 4 * math.pi, 3.0), SimConfig(horizon=10))
    assert np.array_equal(a.switch_times(), b.switch_times())
    assert np.max(np.abs(a.col("d") - b.col("d"))) < 1e-9  # only sin/cos rounding of the start differs


def test_certificates_never_violated():
    # safety once inside, and the stage-1 progress rate inside its staging set
    for x0 in random_starts(12, seed=3):
        tr = simulate_hybrid(None, x0, SimConfig(horizon=40), on_singular="stop")
        v = tr.V()
        hit = np.nonzero(v <= 0)[0]
        if len(hit):
            assert np.max(v[hit[0]:]) <= 1e-6
        g, h, d = tr.col("g"), tr.col("h"), tr.col("d")
        s1 = (g > 0) & (2 * g * g > 1) & (h > 0)
        idx = np.nonzero(s1[:-1] & s1[1:])[0]
        if len(idx):
            rate = (d[idx + 1] - d[idx]) / (tr.t[idx + 1] - tr.t[idx])
            assert np.all(rate <= -(math.sqrt(2) / 2 - 1e-3))

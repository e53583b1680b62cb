import json
import math

import pytest

from hykeep.cli import (
    EXIT_DISPROVED, EXIT_OK, EXIT_UNDETERMINED, EXIT_USAGE, classify, compare_regions, exit_code, main,
)
from hykeep.certify import DISPROVED, PROVED, UNDETERMINED


def _strip(obj):
    if isinstance(obj, dict):
        return {k: _strip(v) for k, v in obj.items() if k not in ("timings", "wall_time")}
    if isinstance(obj, list):
        return [_strip(v) for v in obj]
    return obj


def _run_json(tmp_path, name, args):
    out = tmp_path / f"{name}.json"
    rc = main([*args, "--json", str(out)])
    return rc, json.loads(out.read_text())


def test_exit_code_priority():
    assert exit_code([PROVED, PROVED]) == EXIT_OK
    assert exit_code([PROVED, UNDETERMINED]) == EXIT_UNDETERMINED
    assert exit_code([UNDETERMINED, DISPROVED]) == EXIT_DISPROVED
    assert exit_code([]) == EXIT_OK


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["reach", "--band", "-1"],
    ["safety", "--box", "d=3:1"],
    ["safety", "--box", "zz=0:1"],
    ["darboux", "--mode", "sideways"],
    ["compare", "--grid", "3"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_model_json(tmp_path):
    rc, doc = _run_json(tmp_path, "model", ["model"])
    assert rc == EXIT_OK
    assert doc["tool"] == "hykeep" and len(doc["model_hash"]) >= 16


def test_safety_proves_and_is_reproducible(tmp_path):
    rc1, a = _run_json(tmp_path, "a", ["safety"])
    rc2, b = _run_json(tmp_path, "b", ["safety"])
    assert rc1 == rc2 == EXIT_OK
    assert all(c["verdict"] == PROVED for c in a["certificates"].values())
    assert json.dumps(_strip(a), sort_keys=True) == json.dumps(_strip(b), sort_keys=True)


def test_failed_barrier_is_not_proved():
    # a failed inductive step is not a counterexample to invariance
    assert main(["safety", "--expr", "d - 4"]) == EXIT_UNDETERMINED



def test_reach_json(tmp_path):
    rc, doc = _run_json(tmp_path, "reach", ["reach"])
    assert rc == EXIT_OK
    assert doc["certificates"]
    assert all(c["verdict"] == PROVED for c in doc["certificates"].values())


def test_tiny_budget_is_undetermined():
    assert main(["reach", "--budget", "2", "--max-depth", "1"]) == EXIT_UNDETERMINED


def test_simulate_and_singular(tmp_path):
    csv = tmp_path / "run.csv"
    svg = tmp_path / "run.svg"
    assert main(["simulate", "--csv", str(csv), "--svg", str(svg)]) == EXIT_OK
    assert csv.read_text().startswith("t,")
    assert svg.read_text().startswith("<svg")
    assert main(["singular"]) == EXIT_OK


def test_classify_point_in_all_three():
    got = classify(3 * math.pi / 2, 1.0)
    assert got == {"V<=0": True, "V<=-1/2": True, "interval": True}
    assert not classify(math.pi / 2, 5.0)["V<=0"]


def test_compare_regions_inclusions():
    res = compare_regions(200)
    assert res["fraction_V0_in_interval"] == 1.0
    assert res["fraction_Vhalf_in_V0"] == 1.0
    assert res["fraction_Vhalf_in_interval"] == 1.0
    assert res["svg"].startswith("<svg")
    with pytest.raises(ValueError):
        compare_regions(5)


def test_compare_command(tmp_path):
    rc, doc = _run_json(tmp_path, "cmp", ["compare", "--grid", "100"])
    assert rc == EXIT_OK
    assert doc["results"]["compare"]["fraction_V0_in_interval"] == 1.0

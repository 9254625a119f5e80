import json
import subprocess
import sys

import pytest

from quditlab.core import StateVector, circuit_from_dict
from quditlab.decomposer import build_full_mct
from quditlab.simulator import run


def cli(*args, cwd=None, env=None):
    return subprocess.run([sys.executable, "-m", "quditlab.cli", *map(str, args)],
                          capture_output=True, text=True, cwd=cwd, env=env)


def test_compile_then_simulate_single_string(tmp_path):
    c = tmp_path / "c.json"
    assert cli("compile", "--topology", "type-b-linear", "--n", 4, "--out", c).returncode == 0
    r = cli("simulate", "--circuit", c, "--input", "0100")
    assert r.returncode == 0
    assert json.loads(r.stdout)["amplitudes"] == [["2000", 1.0, 0.0]]


def test_round_trip_matches_in_memory_pipeline(tmp_path):
    c = tmp_path / "c.json"
    cli("compile", "--topology", "type-a-two-control-tree", "--n", 3, "--full", "--out", c)
    loaded = circuit_from_dict(json.loads(c.read_text()))
    built = build_full_mct("type-a-two-control-tree", 3).circuit
    assert loaded.gates == built.gates and loaded.dims == built.dims
    out = json.loads(cli("simulate", "--circuit", c).stdout)
    expected = run(StateVector.uniform_plus(built.dims), built)
    assert StateVector.from_records(out["dims"], out["amplitudes"]).allclose(expected, atol=1e-11)


def test_predict_type_a_linear_limit():
    r = cli("predict", "--topology", "type-a-linear", "--n", 64, "--kmax", 3)
    lines = r.stdout.splitlines()
    assert lines[0] == "k,frequency" and lines[1] == "1,0.5"
    assert abs(float(lines[-1].split(",")[1]) - 2) < 1e-12
    j = json.loads(cli("predict", "--topology", "type-b-tree", "--n", 8, "--format", "json").stdout)
    assert j["frequencies"][0] == {"k": 1, "f": 1.0}


def test_stats_on_empty_circuit(tmp_path):
    c = tmp_path / "empty.json"
    c.write_text(json.dumps({"dims": [3, 3, 3], "gates": []}))
    r = cli("stats", "--circuit", c)
    assert r.returncode == 0 and r.stdout == "size,count,total_configs,frequency\n"


def test_stats_outputs_identical_across_workers_and_seeds(tmp_path):
    c = tmp_path / "c.json"
    cli("compile", "--topology", "type-b-tree", "--n", 8, "--out", c)
    outs = {cli("stats", "--circuit", c, "--workers", w).stdout for w in (1, 2, 8)}
    assert len(outs) == 1
    a = cli("stats", "--circuit", c, "--samples", 500, "--seed", 3).stdout
    assert a == cli("stats", "--circuit", c, "--samples", 500, "--seed", 3).stdout


def test_recurrence_decay_and_analyze(tmp_path):
    r = cli("recurrence", "--depth", 4)
    assert r.stdout.splitlines()[:2] == ["N,k,R", "2,1,1"]
    c = tmp_path / "c.json"
    cli("compile", "--topology", "type-a-linear", "--n", 3, "--out", c)
    params = tmp_path / "p.json"
    params.write_text('{"kappa01":0.1,"kappa12":0.27027,"T2_01":3.7,"T2star_12":1.2}')
    d = cli("decay", "--circuit", c, "--params", params, "--t-max", 0.5, "--steps", 5)
    assert d.returncode == 0 and d.stdout.splitlines()[:2] == ["t_us,fidelity", "0,1"]
    assert len(d.stdout.splitlines()) == 7
    p = cli("analyze", "purity", "--n", 4)
    assert p.stdout.splitlines()[1].startswith("0,0.625,0.625,")
    q = cli("analyze", "dispersion", "--n", 3, "--error", "Z2", "--at", 1)
    assert q.stdout.splitlines()[2] == "Z2,1,1,0.5,0.5"


@pytest.mark.parametrize("args,code", [
    (("compile", "--topology", "type-b-tree", "--n", 6), 1),
    (("predict", "--topology", "star-shift", "--n", 4), 1),
    (("simulate", "--circuit", "/nonexistent.json"), 1),
    (("recurrence", "--depth", 9), 2),
])
def test_error_exit_codes(args, code):
    r = cli(*args)
    assert r.returncode == code
    assert len(r.stderr.strip().splitlines()) == 1


def test_capacity_override_by_environment(tmp_path):
    import os

    c = tmp_path / "c.json"
    cli("compile", "--topology", "type-a-linear", "--n", 4, "--out", c)
    env = dict(os.environ, QUDITLAB_MAX_DIM="50")
    r = cli("decay", "--circuit", c, "--t-max", 0.1, "--steps", 1, env=env)
    assert r.returncode == 2 and "capacity" in r.stderr

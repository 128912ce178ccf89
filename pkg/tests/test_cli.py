import csv
import json
import os
import subprocess
import sys

import pytest


def run(*args, env=None, cwd=None):
    full_env = dict(os.environ) | (env or {})
    return subprocess.run([sys.executable, "-m", "invsq_nls", *args], capture_output=True, text=True,
                          env=full_env, cwd=cwd, timeout=600)


def blowup_config(path, c=1.3, t_max=2.0, n=512):
    doc = {"a": 1, "p": 4, "lambda": -1, "dt": 2e-4, "t_max": t_max, "sample_every": 10, "blowup_factor": 10,
           "grid": {"n": n, "r_max": 25}, "initial_data": {"type": "ground-state-multiple", "params": {"c": c}}}
    path.write_text(json.dumps(doc))
    return path


def test_ground_state_certificate(tmp_path):
    res = run("ground-state", "--a", "1", "--p", "4", "--out", str(tmp_path))
    assert res.returncode == 0, res.stderr
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert max(cert["pohozaev_errors"].values()) <= 1e-6
    assert cert["s_p"] == pytest.approx(0.5)
    with open(tmp_path / "profile.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "Q"] and len(rows) == 513


def test_ground_state_missing_p(tmp_path):
    res = run("ground-state", "--a", "1", "--out", str(tmp_path))
    assert res.returncode == 2
    assert json.loads(res.stderr.strip().splitlines()[-1])["error"] == "UsageError"


def test_ground_state_rejects_zero_a(tmp_path):
    res = run("ground-state", "--a", "0", "--p", "4", "--out", str(tmp_path))
    assert res.returncode == 2


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"a": 1,, }')
    res = run("evolve", "--config", str(bad), "--out", str(tmp_path / "o"))
    assert res.returncode == 2
    err = json.loads(res.stderr.strip().splitlines()[-1])
    assert "line 1" in err["message"]


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"a": 1, "p": 4, "colour": 1, "grid": {"n": 64, "r_max": 20},
                               "initial_data": {"type": "gaussian"}}))
    assert run("evolve", "--config", str(cfg), "--out", str(tmp_path / "o")).returncode == 2


def test_evolve_blowup(tmp_path):
    out = tmp_path / "run"
    res = run("evolve", "--config", str(blowup_config(tmp_path / "c.json")), "--out", str(out))
    assert res.returncode == 0, res.stderr
    doc = json.loads((out / "verdict.json").read_text())
    assert doc["verdict"] == "BlowUp"
    header = (out / "diagnostics.csv").read_text().splitlines()[0]
    assert header == "t,mass,energy,hdot_a,lp2_norm,ball_mass,morawetz_action,virial,coercivity_margin"


def test_evolve_contaminated_exits_zero(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"a": 1, "p": 4, "lambda": 1, "dt": 0.01, "t_max": 20, "ball_radius": 2,
                               "grid": {"n": 128, "r_max": 20},
                               "initial_data": {"type": "gaussian", "params": {"amplitude": 1, "width": 1}}}))
    res = run("evolve", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert res.returncode == 0
    doc = json.loads((tmp_path / "o" / "verdict.json").read_text())
    assert doc["verdict"] == "Undetermined" and "warning" in doc


def test_evolve_flag_overrides(tmp_path):
    out = tmp_path / "o"
    res = run("evolve", "--config", str(blowup_config(tmp_path / "c.json")), "--out", str(out),
              "--tmax", "0.01", "--n", "256")
    assert res.returncode == 0, res.stderr
    doc = json.loads((out / "verdict.json").read_text())
    assert doc["grid"]["n"] == 256 and doc["config"]["t_max"] == 0.01


def _sweep_spec(path, values):
    spec = {"base": {"a": 1, "p": 4, "lambda": -1, "dt": 2e-4, "t_max": 2.0, "sample_every": 10,
                     "blowup_factor": 10, "grid": {"n": 512, "r_max": 25}},
            "family": {"type": "ground-state-multiple", "values": values}}
    path.write_text(json.dumps(spec))
    return path


def test_sweep_blowup_side_and_isolation(tmp_path):
    spec = _sweep_spec(tmp_path / "s.json", [1.2, 1.5])
    r1 = run("sweep", "--spec", str(spec), "--out", str(tmp_path / "a"), env={"INVSQ_NLS_THREADS": "2"})
    assert r1.returncode == 0, r1.stderr
    with open(tmp_path / "a" / "threshold_table.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["verdict"] for r in rows] == ["BlowUp", "BlowUp"]
    assert all(r["threshold_verdict"] == "AboveThreshold" for r in rows)
    # reversed order and one worker: per-member artifacts are byte-identical
    rev = _sweep_spec(tmp_path / "r.json", [1.5, 1.2])
    r2 = run("sweep", "--spec", str(rev), "--out", str(tmp_path / "b"), env={"INVSQ_NLS_THREADS": "1"})
    assert r2.returncode == 0, r2.stderr
    for c, (ia, ib) in {"1.2": (0, 1), "1.5": (1, 0)}.items():
        da, db = tmp_path / "a" / f"member_{ia:03d}_{c}", tmp_path / "b" / f"member_{ib:03d}_{c}"
        for name in ("diagnostics.csv", "verdict.json"):
            assert (da / name).read_bytes() == (db / name).read_bytes()


def test_sweep_empty_family(tmp_path):
    spec = _sweep_spec(tmp_path / "s.json", [])
    assert run("sweep", "--spec", str(spec), "--out", str(tmp_path / "o")).returncode == 2


def test_verify_list():
    res = run("verify", "--list")
    assert res.returncode == 0
    assert "morawetz_closure" in res.stdout


def test_verify_default_passes(tmp_path):
    res = run("verify", "--out", str(tmp_path))
    assert res.returncode == 0, res.stdout + res.stderr


def test_verify_injected_sign_error_fails(tmp_path):
    res = run("verify", "--inject", "morawetz-sign", "--out", str(tmp_path))
    assert res.returncode == 3

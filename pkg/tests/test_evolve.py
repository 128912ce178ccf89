import json

import numpy as np
import pytest

from invsq_nls import diagnostics as dg
from invsq_nls.errors import ConfigurationError, UsageError
from invsq_nls.evolve import (CSV_COLUMNS, SimConfig, Verdict, budget_exponent, build_initial_data, evolve,
                              gaussian_data, nonlinear_phase, strang_step)
from invsq_nls.grid import RadialField, grid_for_potential


@pytest.fixture(scope="module")
def g_small():
    return grid_for_potential(1.0, 40.0, 256)


def test_config_validation():
    for bad in ({"lam": 0}, {"a": 0.0}, {"p": 2.0}, {"dt": -1.0}, {"dt": 2.0, "t_max": 1.0},
                {"sample_every": 0}, {"blowup_factor": 1.0}):
        kw = {"a": 1.0, "p": 4.0} | bad
        with pytest.raises(ConfigurationError):
            SimConfig(**kw)


def test_config_dict_roundtrip():
    cfg = SimConfig(a=1.0, p=4.0, lam=1, dt=2e-3, t_max=3.0)
    d = cfg.to_dict()
    assert d["lambda"] == 1 and "lam" not in d
    assert SimConfig.from_dict(d) == cfg
    with pytest.raises(ConfigurationError):
        SimConfig.from_dict({"a": 1.0, "p": 4.0, "bogus": 1})


def test_nonlinear_phase_keeps_modulus(rng):
    v = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    for lam in (1, -1):
        np.testing.assert_allclose(np.abs(nonlinear_phase(v, lam, 4.0, 0.3)), np.abs(v), rtol=1e-14)


def test_zero_field_stays_zero(g_small):
    z = RadialField.zeros(g_small)
    out = strang_step(z, SimConfig(a=1.0, p=4.0))
    assert not np.any(out.values)


def test_time_reversal(g_small):
    cfg = SimConfig(a=1.0, p=4.0, lam=-1, dt=1e-2)
    u = gaussian_data(g_small, 1.5, 1.0)
    back = strang_step(strang_step(u, cfg), cfg, dt=-cfg.dt)
    assert np.abs(back.values - u.values).max() < 1e-12


def test_strang_local_error_order(g_small):
    cfg = SimConfig(a=1.0, p=4.0, lam=-1, dt=0.04, t_max=1.0)
    u = gaussian_data(g_small, 1.2, 1.0)
    errs = []
    for dt in (0.04, 0.02):
        ref = u
        for _ in range(64):
            ref = strang_step(ref, cfg, dt=dt / 64)
        errs.append(np.linalg.norm(strang_step(u, cfg, dt=dt).values - ref.values))
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.1)


def test_linear_run_conserves(g_small):
    cfg = SimConfig(a=1.0, p=4.0, dt=1e-2, t_max=2.0, nonlinear=False, ball_radius=5.0)
    traj = evolve(gaussian_data(g_small, 1.0, 1.0), cfg)
    m, h = traj.series("mass"), traj.series("hdot_a")
    assert np.abs(m / m[0] - 1).max() <= 1e-10
    assert np.abs(h / h[0] - 1).max() <= 1e-10


def test_blowup_above_threshold(gs14):
    g = grid_for_potential(1.0, 25.0, 512)
    u0 = gs14.sample(g) * 1.3
    assert dg.energy(u0, 4.0, -1) < 0
    cfg = SimConfig(a=1.0, p=4.0, lam=-1, dt=2e-4, t_max=2.0, sample_every=10, blowup_factor=10)
    traj = evolve(u0, cfg, keep_fields=False)
    assert traj.classification.verdict is Verdict.BLOWUP
    assert traj.verdict_document()["evidence"]["blowup_time"] < 2.0


def test_linear_flow_classified_scatter():
    g = grid_for_potential(1.0, 150.0, 512)
    cfg = SimConfig(a=1.0, p=4.0, dt=1e-2, t_max=8.0, nonlinear=False, sample_every=5)
    traj = evolve(gaussian_data(g, 1.0, 1.0), cfg, keep_fields=False)
    assert traj.classification.verdict is Verdict.SCATTER


def test_short_run_undetermined(g_small):
    cfg = SimConfig(a=1.0, p=4.0, lam=-1, dt=1e-3, t_max=0.05, sample_every=5)
    traj = evolve(gaussian_data(g_small, 0.5, 1.0), cfg)
    assert traj.classification.verdict is Verdict.UNDETERMINED


def test_contaminated_run_flags_warning():
    g = grid_for_potential(1.0, 20.0, 128)
    cfg = SimConfig(a=1.0, p=4.0, lam=1, dt=1e-2, t_max=20.0, sample_every=5, ball_radius=2.0)
    traj = evolve(gaussian_data(g, 1.0, 1.0), cfg)
    assert traj.contaminated
    doc = traj.verdict_document()
    assert doc["verdict"] == "Undetermined"
    assert "warning" in doc


def test_initial_support_enforced(g_small):
    wide = gaussian_data(g_small, 1.0, 10.0)
    with pytest.raises(ConfigurationError):
        evolve(wide, SimConfig(a=1.0, p=4.0))


def test_mismatched_potential_rejected(g_small):
    with pytest.raises(UsageError):
        evolve(gaussian_data(g_small, 1.0, 1.0), SimConfig(a=2.0, p=4.0))


def test_initial_data_specs(g_small):
    u = build_initial_data(g_small, {"type": "gaussian", "params": {"amplitude": 2.0, "width": 1.0}}, 4.0)
    assert np.abs(u.values).max() == pytest.approx(2.0 * np.exp(-0.5), rel=1e-3)
    with pytest.raises(ConfigurationError):
        build_initial_data(g_small, {"type": "ground-state-multiple", "params": {}}, 4.0)
    with pytest.raises(ConfigurationError):
        build_initial_data(g_small, {"type": "soliton"}, 4.0)
    with pytest.raises(ConfigurationError):
        build_initial_data(g_small, {"type": "gaussian", "params": {"amp": 1.0}}, 4.0)


def test_budget_exponent_synthetic():
    t = np.linspace(0.0, 10.0, 2001)
    assert budget_exponent(t, np.ones_like(t), 5.0) == pytest.approx(1.0, abs=1e-10)
    assert budget_exponent(t, t, 5.0) == pytest.approx(2.0, abs=1e-10)
    assert budget_exponent(t, np.sqrt(t), 5.0) == pytest.approx(1.5, abs=1e-3)


def test_artifacts_deterministic(tmp_path, g_small):
    cfg = SimConfig(a=1.0, p=4.0, lam=1, dt=1e-2, t_max=0.5, sample_every=5)
    outs = []
    for k in range(2):
        traj = evolve(gaussian_data(g_small, 1.0, 1.0), cfg, keep_fields=False)
        traj.write_csv(tmp_path / f"d{k}.csv")
        traj.write_verdict(tmp_path / f"v{k}.json")
        outs.append(((tmp_path / f"d{k}.csv").read_bytes(), (tmp_path / f"v{k}.json").read_bytes()))
    assert outs[0] == outs[1]
    header = (tmp_path / "d0.csv").read_text().splitlines()[0].split(",")
    assert tuple(header) == CSV_COLUMNS
    json.loads(outs[0][1])

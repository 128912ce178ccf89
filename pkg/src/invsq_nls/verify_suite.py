"""Self-check ledger behind ``invsq-nls verify``: identities and inequalities on desk-scale runs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics as dg
from .evolve import SimConfig, evolve, gaussian_data, strang_step
from .grid import RadialField, grid_for_potential, hankel_forward, hankel_inverse
from .groundstate import solve_ground_state
from .operators import linear_propagate, oracle_propagate

NAMED_CONFIGS = {
    "default": {"a": 1.0, "p": 4.0},
    "weak-potential": {"a": 0.5, "p": 4.0},
    "cubic": {"a": 1.0, "p": 3.0},
}


@dataclass
class Entry:
    name: str
    residual: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"residual": self.residual, "tolerance": self.tolerance, "passed": self.passed,
                "detail": self.detail}


def _entry(name, residual, tolerance, detail="", passed=None):
    residual = float(residual)
    ok = (residual <= tolerance) if passed is None else bool(passed)
    return Entry(name, residual, float(tolerance), bool(ok and math.isfinite(residual)), detail)


def check_roundtrip(a, p, ctx):
    g = grid_for_potential(a, 20.0, 256)
    rng = np.random.default_rng(0)
    u = RadialField(g, rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n))
    back = hankel_inverse(hankel_forward(u)).values
    return _entry("dht_roundtrip", np.abs(back - u.values).max() / np.abs(u.values).max(), 1e-10)


def check_oracle(a, p, ctx):
    g = grid_for_potential(a, 20.0, 128)
    u0 = gaussian_data(g, 1.0, 2.5)
    ref = linear_propagate(u0, 1.0).values
    fd = oracle_propagate(u0, 1.0).values
    return _entry("linear_vs_oracle", np.linalg.norm(fd - ref) / np.linalg.norm(ref), 1e-3)


def check_ground_state(a, p, ctx):
    gs = ctx["gs"]
    worst = max(gs.residual_sup / 1e-8, max(gs.pohozaev_errors.values()) / 1e-6)
    return _entry("ground_state_certificate", worst, 1.0,
                  f"residual={gs.residual_sup:.2e} pohozaev={max(gs.pohozaev_errors.values()):.2e}",
                  passed=gs.certified and worst <= 1.0)


def check_sharpness(a, p, ctx):
    gs = ctx["gs"]
    g = gs.profile.grid
    rng = np.random.default_rng(1)
    r = g.nodes
    worst = -np.inf
    for _ in range(50):
        c = rng.uniform(0.2, 3.0, 3)
        amp = rng.standard_normal(3)
        vals = sum(A * r**g.nu * np.exp(-(r / w) ** 2) for A, w in zip(amp, c))
        worst = max(worst, dg.gn_quotient(RadialField(g, vals), p) / gs.sharp_constant - 1.0)
    return _entry("gn_sharpness", max(worst, 0.0), 1e-4, f"max quotient/C_a - 1 = {worst:.3e}")


def check_cutoff_identity(a, p, ctx):
    u = ctx["gs"].profile
    lhs, rhs = dg.cutoff_identity(u, 3.0)
    return _entry("cutoff_identity", abs(lhs - rhs) / abs(lhs), 1e-6)


def check_conservation(a, p, ctx):
    drifts = []
    mass_drift = 0.0
    for dt in (2e-3, 1e-3):
        traj = ctx["focusing_run"](dt)
        m = traj.series("mass")
        e = traj.series("energy")
        mass_drift = max(mass_drift, np.abs(m / m[0] - 1).max())
        drifts.append(np.abs(e / e[0] - 1).max())
    ratio = drifts[0] / drifts[1]
    return [
        _entry("mass_conservation", mass_drift, 1e-10),
        _entry("energy_drift_ratio", abs(ratio - 4.0), 0.8, f"ratio={ratio:.3f}"),
    ]


def closure_residual(traj, eps_fraction=1e-3):
    """max |dM_w/dt - RHS| / (|RHS| + eps) over interior samples (central differences)."""
    t = traj.sample_times
    act = traj.series("morawetz_action")
    rhs = traj.series("morawetz_rhs")[1:-1]
    fd = (act[2:] - act[:-2]) / (t[2:] - t[:-2])
    eps = eps_fraction * np.abs(rhs).max()
    return float(np.max(np.abs(fd - rhs) / (np.abs(rhs) + eps)))


def check_morawetz(a, p, ctx):
    out = []
    for name, traj in (("focusing", ctx["focusing_run"](1e-3)), ("defocusing", ctx["defocusing_run"]())):
        out.append(_entry(f"morawetz_closure_{name}", closure_residual(traj), 1e-2))
    return out


def check_virial(a, p, ctx):
    traj = ctx["defocusing_run"]()
    t = traj.sample_times
    v = traj.series("virial")
    ls = traj.series("local_smoothing_integrand")
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (ls[1:] + ls[:-1]) * np.diff(t))))
    slack = (v - v[0]) - (2 * a - 0.5) * cum
    scale = max(np.abs(v).max(), abs(2 * a - 0.5) * cum[-1])
    return _entry("virial_local_smoothing", max(-slack.min(), 0.0) / scale, 1e-3)


def check_pseudo_stress(a, p, ctx):
    g = ctx["grid"]
    u0 = gaussian_data(g, 1.0, 1.0)
    start = strang_step(u0, SimConfig(a=a, p=p, lam=1, dt=0.05, t_max=1.0))
    res = []
    for dt in (4e-3, 2e-3):
        cfg = SimConfig(a=a, p=p, lam=1, dt=dt, t_max=1.0)
        u1 = strang_step(start, cfg)
        u2 = strang_step(u1, cfg)
        rep = dg.pseudo_stress_check((start, u1, u2), dt, p, 1)
        res.append(max(rep.relative_mass_residual, rep.relative_momentum_residual))
    ratio = res[0] / res[1]
    return _entry("pseudo_stress_ratio", abs(ratio - 4.0), 0.8, f"ratio={ratio:.3f}")


def check_dilation(a, p, ctx):
    g = grid_for_potential(a, 20.0, 384)
    r = g.nodes
    base = RadialField(g, r**g.nu * np.exp(-r**2 / 2))
    worst = 0.0
    for mu in (0.5, 2.0):
        v = RadialField(g, (mu * r) ** g.nu * np.exp(-(mu * r) ** 2 / 2))
        worst = max(worst,
                    abs(dg.mass(v) / (dg.mass(base) * mu**-2) - 1),
                    abs(dg.lp_power(v, p + 2) / (dg.lp_power(base, p + 2) * mu**-2) - 1),
                    abs(dg.sobolev_norm_a(v) / dg.sobolev_norm_a(base) - 1))
    return _entry("dilation_covariance", worst, 1e-8)


def check_coercivity(a, p, ctx):
    q = ctx["gs"].profile
    return _entry("coercivity_at_ground_state", abs(dg.coercivity_margin(q, p)), 1e-6)


SUITE = (
    ("dht_roundtrip", check_roundtrip),
    ("linear_vs_oracle", check_oracle),
    ("ground_state_certificate", check_ground_state),
    ("gn_sharpness", check_sharpness),
    ("cutoff_identity", check_cutoff_identity),
    ("coercivity_at_ground_state", check_coercivity),
    ("dilation_covariance", check_dilation),
    ("mass_conservation + energy_drift_ratio", check_conservation),
    ("morawetz_closure", check_morawetz),
    ("virial_local_smoothing", check_virial),
    ("pseudo_stress_ratio", check_pseudo_stress),
)


def suite_names() -> list[str]:
    return [name for name, _ in SUITE]


def _context(a: float, p: float) -> dict:
    gs = solve_ground_state(a, p)
    grid = grid_for_potential(a, 80.0, 384)
    runs: dict = {}

    def focusing_run(dt):
        if dt not in runs:
            u0 = 0.5 * gs.sample(grid)
            cfg = SimConfig(a=a, p=p, lam=-1, dt=dt, t_max=1.0, sample_every=int(round(0.01 / dt)),
                            ball_radius=5.0, boundary_tolerance=1.0)
            runs[dt] = evolve(u0, cfg, keep_fields=False)
        return runs[dt]

    def defocusing_run():
        if "defocus" not in runs:
            u0 = gaussian_data(grid, 1.5, 1.0)
            cfg = SimConfig(a=a, p=p, lam=1, dt=1e-3, t_max=1.0, sample_every=10,
                            ball_radius=5.0, boundary_tolerance=1.0)
            runs["defocus"] = evolve(u0, cfg, keep_fields=False)
        return runs["defocus"]

    return {"gs": gs, "grid": grid, "focusing_run": focusing_run, "defocusing_run": defocusing_run}


def run_suite(a: float, p: float, inject: str | None = None) -> dict:
    """Run every check; ``inject='morawetz-sign'`` flips the nonlinear Morawetz term (mutation test)."""
    previous = dg.MORAWETZ_NONLINEAR_SIGN
    if inject == "morawetz-sign":
        dg.MORAWETZ_NONLINEAR_SIGN = -previous
    elif inject is not None:
        raise ValueError(f"unknown injection {inject!r}")
    try:
        ctx = _context(a, p)
        entries = []
        for _, check in SUITE:
            out = check(a, p, ctx)
            entries.extend(out if isinstance(out, list) else [out])
    finally:
        dg.MORAWETZ_NONLINEAR_SIGN = previous
    return {
        "a": a,
        "p": p,
        "passed": all(e.passed for e in entries),
        "entries": {e.name: e.as_dict() for e in entries},
    }

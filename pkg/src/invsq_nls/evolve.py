"""Strang-split time stepping of i u_t = L_a u + lam |u|^p u and trajectory
classification (Scatter / BlowUp / Undetermined).

Both substeps are exact: the nonlinear one is the pointwise phase rotation
u -> u exp(-i lam |u|^p tau) and the linear one is the spectral propagator.
Both preserve the discrete L^2 norm, so mass drifts only by roundoff.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import diagnostics as dg
from .errors import ConfigurationError, UsageError
from .grid import RadialField, RadialGrid
from .operators import propagator_matrix

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "mass", "energy", "hdot_a", "lp2_norm", "ball_mass", "morawetz_action",
               "virial", "coercivity_margin")


@dataclass
class SimConfig:
    a: float
    p: float
    lam: int = -1
    dt: float = 1e-3
    t_max: float = 1.0
    sample_every: int = 10
    blowup_cap: float | None = None  # absolute H^1_a ceiling; None -> blowup_factor x initial
    blowup_factor: float = 1e3
    ball_radius: float = 5.0
    boundary_tolerance: float = 1e-6
    nonlinear: bool = True  # test hook: False runs the linear flow

    def __post_init__(self):
        if self.lam not in (1, -1):
            raise ConfigurationError(f"lambda must be +1 or -1, got {self.lam}")
        if not self.a > 0:
            raise ConfigurationError("a must be positive")
        if not self.p > 2:
            raise ConfigurationError("p must exceed 2")
        for name in ("dt", "t_max", "ball_radius", "boundary_tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.dt > self.t_max:
            raise ConfigurationError("dt must not exceed t_max")
        if int(self.sample_every) < 1:
            raise ConfigurationError("sample_every must be a positive integer")
        if self.blowup_cap is not None and not self.blowup_cap > 0:
            raise ConfigurationError("blowup_cap must be positive")
        if not self.blowup_factor > 1:
            raise ConfigurationError("blowup_factor must exceed 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown SimConfig fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


class Verdict(str, enum.Enum):
    SCATTER = "Scatter"
    BLOWUP = "BlowUp"
    UNDETERMINED = "Undetermined"


@dataclass
class Classification:
    verdict: Verdict
    evidence: dict

    def as_dict(self) -> dict:
        return {"verdict": self.verdict.value, "evidence": self.evidence}


@dataclass
class Trajectory:
    config: SimConfig
    sample_times: np.ndarray
    fields: list
    diagnostics: list
    blowup_cap: float
    cap_reachable: bool = True
    blew_up: bool = False
    nonfinite: bool = False
    contaminated: bool = False
    terminated_at: float | None = None
    classification: Classification | None = field(default=None)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.diagnostics])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rec in self.diagnostics:
                row = (rec.t, rec.mass, rec.energy, rec.hdot_a, rec.lp2, rec.ball_mass,
                       rec.morawetz_action, rec.virial, rec.coercivity_margin)
                w.writerow([repr(float(x)) for x in row])

    def verdict_document(self) -> dict:
        doc = {
            "config": self.config.to_dict(),
            "blowup_cap": self.blowup_cap,
            "blowup_cap_reachable": self.cap_reachable,
            "terminated_at": self.terminated_at,
            "samples": len(self.diagnostics),
        }
        doc.update(self.classification.as_dict())
        if self.contaminated:
            doc["warning"] = "ContaminatedByReflection: boundary mass exceeded tolerance"
        return doc

    def write_verdict(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.verdict_document(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def gaussian_data(grid: RadialGrid, amplitude: float, width: float) -> RadialField:
    """A (r/width)^nu exp(-r^2 / (2 width^2)), the natural bump in the order-nu class."""
    if not width > 0:
        raise ConfigurationError("gaussian width must be positive")
    r = grid.nodes / width
    return RadialField(grid, amplitude * r**grid.nu * np.exp(-0.5 * r * r))


def ground_state_multiple(grid: RadialGrid, p: float, c: float, gs=None) -> RadialField:
    """c * Q_a sampled on ``grid`` (Q_a solved at the grid's own a when not supplied)."""
    from .groundstate import solve_ground_state

    if gs is None:
        gs = solve_ground_state(grid.a, p)
    return c * gs.sample(grid)


def build_initial_data(grid: RadialGrid, spec: dict, p: float, gs=None) -> RadialField:
    """Initial data from ``{"type": "gaussian" | "ground-state-multiple", "params": {...}}``."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigurationError("initial_data must be an object with a 'type' field")
    params = dict(spec.get("params", {}))
    kind = spec["type"]
    try:
        if kind == "gaussian":
            u0 = gaussian_data(grid, float(params.pop("amplitude", 1.0)), float(params.pop("width", 1.0)))
        elif kind == "ground-state-multiple":
            u0 = ground_state_multiple(grid, p, float(params.pop("c")), gs)
        else:
            raise ConfigurationError(f"unknown initial data type {kind!r}")
    except KeyError as exc:
        raise ConfigurationError(f"initial data {kind!r} is missing parameter {exc}") from None
    if params:
        raise ConfigurationError(f"unused initial data parameters: {sorted(params)}")
    return u0


def nonlinear_phase(values: np.ndarray, lam: int, p: float, tau: float) -> np.ndarray:
    return values * np.exp(-1j * lam * np.abs(values) ** p * tau)


def strang_step(u: RadialField, cfg: SimConfig, dt: float | None = None) -> RadialField:
    """One Strang step: half nonlinear phase, full linear step, half nonlinear phase.

    ``dt`` overrides ``cfg.dt`` (negative values step backward in time).
    """
    dt = cfg.dt if dt is None else dt
    prop = propagator_matrix(u.grid, float(dt))
    v = u.values
    if cfg.nonlinear:
        v = nonlinear_phase(v, cfg.lam, cfg.p, 0.5 * dt)
    v = prop @ v
    if cfg.nonlinear:
        v = nonlinear_phase(v, cfg.lam, cfg.p, 0.5 * dt)
    if not np.all(np.isfinite(v)):
        raise FloatingPointError("non-finite values after Strang step")
    return u.with_values(v)


def check_initial_support(u0: RadialField, tol: float = 1e-8) -> None:
    outer = u0.grid.outer_mask()
    peak = np.abs(u0.values).max()
    if peak > 0 and np.abs(u0.values[outer]).max() > tol * max(peak, 1.0):
        raise ConfigurationError(
            "initial data must be below 1e-8 over the outer 10% of the grid; enlarge r_max")


def evolve(u0: RadialField, cfg: SimConfig, keep_fields: bool = True, strict_support: bool = True) -> Trajectory:
    """Step to ``cfg.t_max`` (or early termination) and classify the trajectory."""
    if abs(u0.a - cfg.a) > 1e-12:
        raise UsageError(f"initial data has a={u0.a}, config has a={cfg.a}")
    if strict_support:
        check_initial_support(u0)
    grid = u0.grid
    R = cfg.ball_radius
    if not R < grid.r_max / 4:
        raise ConfigurationError("ball_radius must be below r_max/4 (Morawetz weight support)")
    s_p = 1.0 - 2.0 / cfg.p
    dt = cfg.dt
    prop = propagator_matrix(grid, float(dt))

    rec0 = dg.record(u0, 0.0, cfg.p, cfg.lam, R, s_p)
    cap = cfg.blowup_cap if cfg.blowup_cap is not None else cfg.blowup_factor * rec0.hdot_a
    reachable = grid.k_max * math.sqrt(rec0.mass)
    if cap >= reachable:
        log.warning("blow-up cap %.3g exceeds the grid's largest representable H^1_a norm %.3g",
                    cap, reachable)
    traj = Trajectory(cfg, np.array([0.0]), [u0] if keep_fields else [], [rec0], cap,
                      cap_reachable=bool(cap < reachable))
    times = [0.0]

    v = u0.values.copy()
    nl = cfg.nonlinear
    lam, p = cfg.lam, cfg.p
    half = 0.5 * dt
    n_steps = cfg.n_steps
    pending_half = False  # a trailing half nonlinear step not yet applied
    for step in range(1, n_steps + 1):
        if nl:
            v = nonlinear_phase(v, lam, p, dt if pending_half else half)
        v = prop @ v
        pending_half = nl
        if not np.all(np.isfinite(v)):
            traj.nonfinite = traj.blew_up = True
            traj.terminated_at = step * dt
            break
        if step % cfg.sample_every == 0 or step == n_steps:
            if pending_half:
                v = nonlinear_phase(v, lam, p, half)
                pending_half = False
            t = step * dt
            u = u0.with_values(v)
            rec = dg.record(u, t, p, lam, R, s_p)
            traj.diagnostics.append(rec)
            times.append(t)
            if keep_fields:
                traj.fields.append(u)
            if rec.hdot_a > cap:
                traj.blew_up = True
                traj.terminated_at = t
                break
            if rec.boundary_mass > cfg.boundary_tolerance:
                traj.contaminated = True
                traj.terminated_at = t
                break
    traj.sample_times = np.array(times)
    traj.classification = classify(traj)
    return traj


def budget_exponent(times: np.ndarray, density: np.ndarray, t_from: float) -> float:
    """Slope of log int_0^T density dt against log T over samples with T >= t_from."""
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(times))))
    sel = (times >= t_from) & (times > 0) & (cum > 0)
    if sel.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(times[sel]), np.log(cum[sel]), 1)[0])


def classify(traj: Trajectory) -> Classification:
    """Scatter / BlowUp / Undetermined from the recorded diagnostics.

    BlowUp: H^1_a exceeded the cap or a step went non-finite.
    Scatter: (i) the final-quarter minimum of the ball mass is <= 1e-2 of the
    initial mass, (ii) the fitted exponent beta of int_0^T ||u||_{p+2}^{p+2}
    ~ T^beta over the second half of the run is < 1, and (iii) H^1_a stayed
    below twice its initial value. Anything else, including runs stopped by
    boundary contamination, is Undetermined.
    """
    cfg = traj.config
    t = traj.sample_times
    m0 = traj.diagnostics[0].mass
    h0 = traj.diagnostics[0].hdot_a
    hdot = traj.series("hdot_a")
    ball = traj.series("ball_mass")
    lp2 = traj.series("lp2")
    ball_lp2 = traj.series("ball_lp2")
    t_end = t[-1]
    quarter = t >= 0.75 * cfg.t_max
    evidence = {
        "final_time": float(t_end),
        "final_ball_mass": float(ball[-1]),
        "final_lp2": float(lp2[-1]),
        "peak_hdot_a": float(hdot.max()),
        "initial_hdot_a": float(h0),
        "blowup_cap": float(traj.blowup_cap),
        "contaminated": traj.contaminated,
        "nonfinite": traj.nonfinite,
    }
    if traj.blew_up:
        evidence["blowup_time"] = traj.terminated_at
        return Classification(Verdict.BLOWUP, evidence)
    beta = budget_exponent(t, lp2, 0.5 * cfg.t_max)
    ball_beta = budget_exponent(t, ball_lp2, 0.5 * cfg.t_max)
    min_quarter = float(ball[quarter].min()) / m0 if np.any(quarter) and m0 > 0 else float("nan")
    evidence.update({
        "budget_exponent": beta,
        "ball_budget_exponent": ball_beta,
        "final_quarter_min_ball_mass_ratio": min_quarter,
        "hdot_ratio": float(hdot.max() / h0) if h0 > 0 else float("nan"),
    })
    if traj.contaminated:
        return Classification(Verdict.UNDETERMINED, evidence)
    ok_ball = min_quarter <= 1e-2
    ok_beta = beta < 1.0
    ok_h = hdot.max() < 2.0 * h0
    evidence["predicates"] = {"ball_mass": bool(ok_ball), "budget": bool(ok_beta), "hdot_bounded": bool(ok_h)}
    if ok_ball and ok_beta and ok_h:
        return Classification(Verdict.SCATTER, evidence)
    return Classification(Verdict.UNDETERMINED, evidence)

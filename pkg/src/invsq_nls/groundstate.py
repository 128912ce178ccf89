"""Ground state Q_a of L_a Q + Q = Q^{p+1}, sharp Gagliardo-Nirenberg constant
and the threshold quantities of the scattering/blow-up dichotomy.

The profile is found by shooting from the regular singular point r = 0 with
the Frobenius seed Q ~ alpha r^nu (nu = sqrt(a)) and bisecting on alpha. The
shooting solution is resampled onto a RadialGrid (with an exact K_nu tail
beyond the point where the bracketing solutions separate) and then polished
by Newton's method on the discrete equation, so that the grid profile is an
exact stationary state of the discretized flow up to roundoff.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import kv

from . import diagnostics as dg
from .errors import ConfigurationError, NumericError, SolverFailure
from .grid import RadialField, RadialGrid, grid_for_potential

ODE_RTOL = 1e-11
ALPHA_RANGE = (1e-6, 1e6)
DECAY_FLOOR = 1e-12


class ShootOutcome(str, enum.Enum):
    CROSSED_ZERO = "CrossedZero"
    # The decaying branch lost to the growing e^{+r} mode: Q' turned positive
    # again after the maximum while Q > 0 (the undershoot side).
    BLEW_UP = "BlewUp"
    DECAYED = "Decayed"


@dataclass
class ShootResult:
    alpha: float
    outcome: ShootOutcome
    r_event: float
    sol: object = field(repr=False)  # scipy OdeSolution (dense output)
    r_trace: np.ndarray = field(repr=False)
    q_trace: np.ndarray = field(repr=False)


def seed_radius(a: float) -> float:
    return 1e-6 * min(1.0, 1.0 / math.sqrt(a))


def frobenius_seed(a: float, alpha: float, r0: float) -> tuple[float, float]:
    """Q and Q' at r0 from alpha r^nu (1 + r^2 / (4 (nu + 1)))."""
    nu = math.sqrt(a)
    c = 1.0 / (4.0 * (nu + 1.0))
    q = alpha * r0**nu * (1.0 + c * r0 * r0)
    dq = alpha * (nu * r0 ** (nu - 1.0) + (nu + 2.0) * c * r0 ** (nu + 1.0))
    return q, dq


def _rhs(a, p):
    def f(r, y):
        q, dq = y
        return [dq, -dq / r + a * q / (r * r) + q - abs(q) ** p * q]
    return f


def shoot(a: float, p: float, alpha: float, r_end: float = 40.0) -> ShootResult:
    """Integrate outward from the Frobenius seed and classify the trajectory.

    CrossedZero: Q reaches 0. BlewUp: Q' changes sign from negative to
    positive with Q > 0. Decayed: Q and |Q'| both drop below 1e-12, or the
    integration reaches r_end positive and decreasing.
    """
    if not (a > 0 and p > 0 and alpha > 0):
        raise ConfigurationError("shoot needs a > 0, p > 0, alpha > 0")
    r0 = seed_radius(a)

    def crossed(r, y):
        return y[0]
    crossed.terminal, crossed.direction = True, -1

    def turned(r, y):
        return y[1]
    turned.terminal, turned.direction = True, 1

    def decayed(r, y):
        return max(y[0], abs(y[1])) - DECAY_FLOOR
    decayed.terminal, decayed.direction = True, -1

    sol = solve_ivp(_rhs(a, p), (r0, r_end), frobenius_seed(a, alpha, r0), method="DOP853",
                    rtol=ODE_RTOL, atol=1e-300, dense_output=True,
                    events=(crossed, turned, decayed))
    if sol.status < 0:
        raise NumericError(f"shooting integration failed at alpha={alpha}: {sol.message}")
    if sol.t_events[0].size:
        outcome, r_ev = ShootOutcome.CROSSED_ZERO, float(sol.t_events[0][0])
    elif sol.t_events[1].size:
        outcome, r_ev = ShootOutcome.BLEW_UP, float(sol.t_events[1][0])
    else:
        outcome, r_ev = ShootOutcome.DECAYED, float(sol.t[-1])
    return ShootResult(alpha, outcome, r_ev, sol.sol, sol.t, sol.y[0])


def find_bracket(a: float, p: float, r_end: float = 40.0):
    """Scan alpha over [1e-6, 1e6] and return adjacent (lo, hi) with opposite outcomes.

    Returns the two ShootResults ordered by alpha.
    """
    alphas = np.logspace(math.log10(ALPHA_RANGE[0]), math.log10(ALPHA_RANGE[1]), 25)
    prev = None
    for al in alphas:
        cur = shoot(a, p, float(al), r_end)
        if prev is not None and {prev.outcome, cur.outcome} == {ShootOutcome.CROSSED_ZERO, ShootOutcome.BLEW_UP}:
            return prev, cur
        if cur.outcome == ShootOutcome.DECAYED:
            return cur, cur
        prev = cur
    raise SolverFailure(f"no shooting bracket in alpha range {ALPHA_RANGE} for a={a}, p={p}")


def bisect_alpha(a: float, p: float, tol: float = 1e-12, r_end: float = 40.0):
    lo, hi = find_bracket(a, p, r_end)
    for _ in range(200):
        if hi.alpha - lo.alpha <= tol * hi.alpha:
            break
        mid_a = math.sqrt(lo.alpha * hi.alpha) if hi.alpha > 2 * lo.alpha else 0.5 * (lo.alpha + hi.alpha)
        mid = shoot(a, p, mid_a, r_end)
        if mid.outcome == ShootOutcome.DECAYED:
            return mid, mid
        if mid.outcome == lo.outcome:
            lo = mid
        else:
            hi = mid
    else:
        raise SolverFailure("alpha bisection did not converge")
    return lo, hi


@dataclass
class ShootingProfile:
    """Continuous profile: bracketing ODE solution up to r_match, c K_nu(r) beyond."""

    a: float
    p: float
    alpha: float
    alpha_bracket: tuple
    r_match: float
    tail_coeff: float
    sol: object = field(repr=False)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        nu = math.sqrt(self.a)
        out = np.empty(r.shape)
        inner = r <= self.r_match
        r0 = seed_radius(self.a)
        ri = r[inner]
        near = ri < r0
        vals = np.empty(ri.shape)
        if np.any(~near):
            vals[~near] = self.sol(ri[~near])[0]
        vals[near] = self.alpha * ri[near] ** nu * (1.0 + ri[near] ** 2 / (4.0 * (nu + 1.0)))
        out[inner] = vals
        out[~inner] = self.tail_coeff * kv(nu, r[~inner])
        return out


def shooting_profile(a: float, p: float, tol: float = 1e-12, r_end: float = 40.0) -> ShootingProfile:
    lo, hi = bisect_alpha(a, p, tol, r_end)
    nu = math.sqrt(a)
    ref = lo if lo.outcome == ShootOutcome.DECAYED else None
    if ref is None:
        # Match where the two bracketing solutions still agree to 1e-7 relative
        # and the profile has decayed well below its peak.
        r_hi = min(lo.r_event, hi.r_event)
        rr = np.linspace(seed_radius(a) * 10, r_hi, 20000)
        ql, qh = lo.sol(rr)[0], hi.sol(rr)[0]
        qmax = max(ql.max(), qh.max())
        peak = rr[np.argmax(ql)]
        ok = (np.abs(ql - qh) <= 1e-7 * np.abs(ql)) & (ql < 1e-3 * qmax) & (rr > peak)
        if not np.any(ok):
            raise SolverFailure("bracketing solutions separate before the profile decays")
        r_match = float(rr[np.nonzero(ok)[0][-1]])
        sol = lo.sol
        q_m = 0.5 * (lo.sol(r_match)[0] + hi.sol(r_match)[0])
    else:
        r_match = float(ref.r_event)
        sol = ref.sol
        q_m = ref.sol(r_match)[0]
    alpha = 0.5 * (lo.alpha + hi.alpha)
    return ShootingProfile(a, p, alpha, (lo.alpha, hi.alpha), r_match, float(q_m / kv(nu, r_match)), sol)


def ground_state_residual(q: np.ndarray, grid: RadialGrid, p: float) -> np.ndarray:
    return grid.la_matrix @ q + q - np.abs(q) ** p * q


def newton_polish(q: np.ndarray, grid: RadialGrid, p: float, tol: float = 1e-14, max_iter: int = 30):
    """Newton iterations on L q + q - |q|^p q = 0 over the grid nodes."""
    lmat = grid.la_matrix
    eye = np.eye(grid.n)
    q = q.copy()
    scale = np.abs(q).max()
    for _ in range(max_iter):
        res = lmat @ q + q - np.abs(q) ** p * q
        if np.abs(res).max() <= tol * scale:
            return q
        jac = lmat + eye - (p + 1.0) * np.diag(np.abs(q) ** p)
        q = q - np.linalg.solve(jac, res)
    res = np.abs(ground_state_residual(q, grid, p)).max()
    if res > 1e-10 * scale:
        raise NumericError(f"Newton polishing stalled at residual {res:.3e}")
    return q


def scaling_index(p: float) -> float:
    """s_p = 1 - 2/p, the scale-critical regularity in two dimensions."""
    return 1.0 - 2.0 / p


@dataclass
class GroundState:
    a: float
    p: float
    profile: RadialField
    alpha_star: float
    residual_sup: float
    shooting_residual_sup: float
    shooting_discrepancy: float
    mass: float
    energy: float
    hdot_a: float
    lp2: float
    sharp_constant: float
    s_p: float
    threshold_me: float
    threshold_grad: float
    pohozaev_errors: dict
    certified: bool
    shooting: ShootingProfile = field(repr=False)

    def sample(self, grid: RadialGrid, polish: bool = True) -> RadialField:
        """The ground state on another grid of the same order (optionally Newton-polished)."""
        if abs(grid.a - self.a) > 1e-12:
            raise ConfigurationError("grid order does not match the ground state's a")
        q = self.shooting(grid.nodes)
        if polish:
            q = newton_polish(q, grid, self.p)
        return RadialField(grid, q)

    def certificate(self) -> dict:
        return {
            "a": self.a,
            "p": self.p,
            "alpha_star": self.alpha_star,
            "mass": self.mass,
            "energy": self.energy,
            "hdot_a": self.hdot_a,
            "lp2": self.lp2,
            "C_a": self.sharp_constant,
            "s_p": self.s_p,
            "thresholds": {"mass_energy": self.threshold_me, "gradient": self.threshold_grad},
            "residual_sup": self.residual_sup,
            "shooting_residual_sup": self.shooting_residual_sup,
            "shooting_discrepancy": self.shooting_discrepancy,
            "pohozaev_errors": self.pohozaev_errors,
            "certified": self.certified,
            "grid": self.profile.grid.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.certificate(), indent=2, sort_keys=True)


def pohozaev_errors(hdot2: float, mass_: float, lp2: float, p: float) -> dict:
    return {
        "multiplier": abs(hdot2 + mass_ - lp2) / lp2,
        "dilation": abs(mass_ - 2.0 / (p + 2.0) * lp2) / lp2,
    }


def default_rmax(a: float) -> float:
    # Q decays like K_nu(r) ~ e^{-r}; keep Q(r_max) around 1e-12 of its peak.
    return 30.0


def solve_ground_state(a: float, p: float, tol: float = 1e-12, n: int = 512,
                       r_max: float | None = None, polish: bool = True) -> GroundState:
    """Compute and certify the ground state on a grid of ``n`` nodes."""
    if not a > 0:
        raise ConfigurationError(f"ground state requires a > 0, got {a}")
    if not p > 2:
        raise ConfigurationError(f"ground state requires p > 2, got {p}")
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    r_max = default_rmax(a) if r_max is None else float(r_max)
    grid = grid_for_potential(a, r_max, n)
    prof = shooting_profile(a, p, tol)

    q_shoot = prof(grid.nodes)
    qmax = np.abs(q_shoot).max()
    shoot_res = float(np.abs(ground_state_residual(q_shoot, grid, p)).max() / qmax)
    q = newton_polish(q_shoot, grid, p) if polish else q_shoot
    profile = RadialField(grid, q)

    m = dg.mass(profile)
    h = dg.sobolev_norm_a(profile)
    lp2 = dg.lp_power(profile, p + 2.0)
    e = 0.5 * h * h - lp2 / (p + 2.0)
    s_p = scaling_index(p)
    poh = pohozaev_errors(h * h, m, lp2, p)
    res = float(np.abs(ground_state_residual(q, grid, p)).max() / np.abs(q).max())
    peak = int(np.argmax(q))
    shape_ok = bool(np.all(q > 0) and np.all(np.diff(q[: peak + 1]) > 0) and np.all(np.diff(q[peak:]) < 0))
    certified = shape_ok and res <= 1e-8 and max(poh.values()) <= 1e-6
    return GroundState(
        a=float(a), p=float(p), profile=profile, alpha_star=prof.alpha,
        residual_sup=res, shooting_residual_sup=shoot_res,
        shooting_discrepancy=float(np.abs(q - q_shoot).max() / np.abs(q).max()),
        mass=m, energy=e, hdot_a=h, lp2=lp2,
        sharp_constant=lp2 / (m * h**p), s_p=s_p,
        threshold_me=m ** (1 - s_p) * e**s_p,
        threshold_grad=math.sqrt(m) ** (1 - s_p) * h**s_p,
        pohozaev_errors=poh, certified=certified, shooting=prof,
    )


def sharp_constant(gs: GroundState) -> float:
    """C_a = ||Q||_{p+2}^{p+2} / (||Q||_2^2 ||Q||_{H^1_a}^p)."""
    return gs.lp2 / (gs.mass * gs.hdot_a**gs.p)


class Verdict(str, enum.Enum):
    BELOW = "BelowThreshold"
    ABOVE = "AboveThreshold"
    INDETERMINATE = "Indeterminate"


@dataclass
class ThresholdVerdict:
    mass_energy: float | None  # M(u0)^{1-s} E(u0)^s, None when E(u0) <= 0
    mass_energy_ratio: float | None  # relative to the ground state; None = NotApplicable
    gradient: float
    gradient_ratio: float
    energy: float
    verdict: Verdict

    @property
    def mass_energy_status(self) -> str:
        if self.mass_energy_ratio is None:
            return "NotApplicable"
        return "below" if self.mass_energy_ratio < 1 else "above"

    def as_dict(self) -> dict:
        return {
            "mass_energy": self.mass_energy,
            "mass_energy_ratio": self.mass_energy_ratio,
            "mass_energy_status": self.mass_energy_status,
            "gradient": self.gradient,
            "gradient_ratio": self.gradient_ratio,
            "energy": self.energy,
            "verdict": self.verdict.value,
        }


def threshold_report(gs: GroundState, u0: RadialField, p: float | None = None,
                     rel_tol: float = 1e-3) -> ThresholdVerdict:
    """Compare u0 against the ground-state thresholds (focusing energy)."""
    p = gs.p if p is None else p
    if abs(u0.a - gs.a) > 1e-12:
        raise ConfigurationError("u0 and the ground state have different potential strengths")
    s = scaling_index(p)
    m = dg.mass(u0)
    h = dg.sobolev_norm_a(u0)
    e = dg.energy(u0, p, -1)
    grad = math.sqrt(m) ** (1 - s) * h**s
    grad_ratio = grad / gs.threshold_grad
    if e > 0:
        me = m ** (1 - s) * e**s
        me_ratio = me / gs.threshold_me
    else:
        me = me_ratio = None

    ratios = [grad_ratio] + ([me_ratio] if me_ratio is not None else [])
    if me_ratio is None:
        verdict = Verdict.ABOVE
    elif any(abs(x - 1.0) <= rel_tol for x in ratios):
        verdict = Verdict.INDETERMINATE
    elif all(x < 1.0 for x in ratios):
        verdict = Verdict.BELOW
    else:
        verdict = Verdict.ABOVE
    return ThresholdVerdict(me, me_ratio, grad, grad_ratio, e, verdict)

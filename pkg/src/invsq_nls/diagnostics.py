"""Functionals of radial fields: conserved quantities, Morawetz and virial actions,
coercivity margins, local smoothing and interaction-Morawetz observables.

All integrals are over the plane (the 2*pi angular factor is included). Plain
densities use the grid's nodal quadrature; integrands with u_r or inverse
powers of r go through the grid's near-origin corrected rule. Radial derivatives are spectral (exact
differentiation of the Fourier-Bessel interpolant).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import jv

from .errors import ConfigurationError, UsageError
from .grid import RadialField, RadialGrid, smooth_step_down
from .operators import PROPAGATOR_SIGN

ADMISSIBLE_PAIRS = ((4.0, 4.0), (8.0 / 3.0, 8.0), (6.0, 3.0))

# Mutation-test hook for the verify suite: -1 flips the nonlinear Morawetz term.
MORAWETZ_NONLINEAR_SIGN = 1


def _dens(u: RadialField) -> np.ndarray:
    return np.abs(u.values) ** 2


_LAST_SAMPLES: list = [None, None]  # [values array, samples]; values are read-only


def _integrate_local(u: RadialField, fn) -> float:
    # Several functionals of the same field share one set of local samples.
    if _LAST_SAMPLES[0] is not u.values:
        _LAST_SAMPLES[0] = u.values
        _LAST_SAMPLES[1] = u.grid.local_samples(u.values)
    return u.grid.integrate_local(fn, u.values, _LAST_SAMPLES[1])


def radial_derivative(u: RadialField, order: int = 1) -> np.ndarray:
    return u.grid.derivative_matrices[order - 1] @ u.values


# --- conserved quantities and norms -------------------------------------------------

def mass(u: RadialField) -> float:
    """M(u) = int |u|^2 dx."""
    return u.grid.integrate(_dens(u))


def sobolev_norm_a(u: RadialField) -> float:
    """||u||_{H^1_a-dot} from the diagonal spectral form 2 pi sum v_i k_i^2 |u_hat_i|^2."""
    g = u.grid
    c = g.forward_matrix @ u.values
    return math.sqrt(2.0 * np.pi * np.dot(g.spectral_weights * g.spectral_nodes**2, np.abs(c) ** 2))


def lp_power(u: RadialField, q: float) -> float:
    """int |u|^q dx."""
    return u.grid.integrate(np.abs(u.values) ** q)


def lp_norm(u: RadialField, q: float) -> float:
    return lp_power(u, q) ** (1.0 / q)


def l8_norm(u: RadialField) -> float:
    return lp_norm(u, 8.0)


def energy(u: RadialField, p: float, lam: int) -> float:
    """E(u) = 1/2 ||u||^2_{H^1_a} + lam/(p+2) ||u||_{p+2}^{p+2}; lam=-1 is focusing."""
    _check_sign(lam)
    return 0.5 * sobolev_norm_a(u) ** 2 + lam / (p + 2.0) * lp_power(u, p + 2.0)


def _check_sign(lam):
    if lam not in (1, -1):
        raise ConfigurationError(f"lambda must be +1 or -1, got {lam}")


def gn_quotient(u: RadialField, p: float) -> float:
    """||u||_{p+2}^{p+2} / (||u||_2^2 ||u||_{H^1_a}^p); maximized by the ground state."""
    m = mass(u)
    h = sobolev_norm_a(u)
    if m == 0.0 or h == 0.0:
        raise ZeroDivisionError("Gagliardo-Nirenberg quotient undefined for the zero field")
    return lp_power(u, p + 2.0) / (m * h**p)


def coercivity_margin(u: RadialField, p: float) -> float:
    """(||u||^2_{H^1_a} - p/(p+2) ||u||^{p+2}_{p+2}) / ||u||^2_{H^1_a}."""
    h2 = sobolev_norm_a(u) ** 2
    if h2 == 0.0:
        raise ZeroDivisionError("coercivity margin undefined for the zero field")
    return (h2 - p / (p + 2.0) * lp_power(u, p + 2.0)) / h2


def scale_invariant_gradient(u: RadialField, s_p: float) -> float:
    """||u||_2^(1-s_p) ||u||_{H^1_a}^s_p."""
    return math.sqrt(mass(u)) ** (1.0 - s_p) * sobolev_norm_a(u) ** s_p


# --- smooth cutoff ---------------------------------------------------------------

def cutoff(r, R: float):
    """chi_R: 1 on r < R/2, 0 on r > R, C-infinity bridge. Returns (chi, chi', chi'')."""
    h = 0.5 * R
    chi, d1, d2 = smooth_step_down((np.asarray(r, dtype=float) - h) / h)
    return chi, d1 / h, d2 / (h * h)


def cutoff_mass(u: RadialField, R: float) -> float:
    """int chi_R^2 |u|^2 dx."""
    if R <= 0:
        raise ConfigurationError("cutoff radius must be positive")
    chi = cutoff(u.grid.nodes, R)[0]
    return u.grid.integrate(chi**2 * _dens(u))


def cutoff_identity(u: RadialField, R: float) -> tuple[float, float]:
    """Both sides of int chi^2 |grad u|^2 = int |grad(chi u)|^2 + int chi Delta(chi) |u|^2.

    The right side expands grad(chi u) = chi' u + chi u_r, so the two sides
    agree only through an integration by parts that the quadrature must honour.
    """

    def lhs(r, v, vr):
        return cutoff(r, R)[0] ** 2 * np.abs(vr) ** 2

    def rhs(r, v, vr):
        chi, c1, c2 = cutoff(r, R)
        return np.abs(c1 * v + chi * vr) ** 2 + chi * (c2 + c1 / r) * np.abs(v) ** 2

    return _integrate_local(u, lhs), _integrate_local(u, rhs)


def ball_coercivity(u: RadialField, R: float, p: float) -> float:
    """int |grad(chi_R u)|^2 - p/(p+2) int |chi_R u|^{p+2}."""
    def grad2(r, v, vr):
        chi, c1, _ = cutoff(r, R)
        return np.abs(c1 * v + chi * vr) ** 2

    chiu = u.with_values(cutoff(u.grid.nodes, R)[0] * u.values)
    return _integrate_local(u, grad2) - p / (p + 2.0) * lp_power(chiu, p + 2.0)


# --- Morawetz weight -------------------------------------------------------------

def weight_profile(r, R: float):
    """w and its radial derivatives w', w'', w''' for the Morawetz weight.

    w = r^2 on r <= R and w = 3 R r on r > 2R. On the band, w' is the Hermite
    interpolant with w'(R)=2R, w'(2R)=3R, w''(R)=2, w''(2R)=0, which turns out
    to be the quadratic 2R + 2s - s^2/R (s = r - R). Integrating it from
    w(R) = R^2 gives w(2R^-) = 11 R^2 / 3, while 3 R r gives 6 R^2: w jumps by a
    constant at 2R. Only derivatives of w enter any identity.
    """
    r = np.asarray(r, dtype=float)
    s = r - R
    inner, band = r <= R, (r > R) & (r <= 2 * R)
    w = np.where(inner, r * r, np.where(band, R * R + 2 * R * s + s * s - s**3 / (3 * R), 3 * R * r))
    w1 = np.where(inner, 2 * r, np.where(band, 2 * R + 2 * s - s * s / R, 3 * R))
    w2 = np.where(inner, 2.0, np.where(band, 2.0 - 2 * s / R, 0.0))
    w3 = np.where(band, -2.0 / R, 0.0)
    return w, w1, w2, w3


@dataclass(eq=False)
class MorawetzWeight:
    R: float
    grid: RadialGrid
    w: np.ndarray = field(repr=False)
    w1: np.ndarray = field(repr=False)
    w2: np.ndarray = field(repr=False)
    lap_w: np.ndarray = field(repr=False)
    bilap_w: np.ndarray = field(repr=False)
    # w''' jumps by -2/R at R and by +2/R at 2R, so Delta^2 w also carries
    # (-2/R) delta(r-R) + (2/R) delta(r-2R); against |u|^2 over the plane that
    # adds 2 pi (2 |u(R)|^2 - 4 |u(2R)|^2) to -int Delta^2 w |u|^2.
    knot_probe: np.ndarray = field(repr=False)  # rows synthesize u(R), u(2R)
    knot_coeffs: np.ndarray = field(repr=False)


def weight_laplacians(r, R: float):
    """(Delta w, Delta^2 w) for the radial weight in two dimensions."""
    _, w1, w2, w3 = weight_profile(r, R)
    r = np.asarray(r, dtype=float)
    lap = w2 + w1 / r
    # Delta^2 w = w'''' + 2 w'''/r - w''/r^2 + w'/r^3, and w'''' = 0 piecewise.
    bilap = 2 * w3 / r - w2 / r**2 + w1 / r**3
    return lap, bilap


def _check_weight(R: float):
    probe = np.array([R * (1 - 1e-12), R, R * (1 + 1e-12), 2 * R * (1 - 1e-12), 2 * R, 2 * R * (1 + 1e-12)])
    _, w1, w2, _ = weight_profile(probe, R)
    scale = 3 * R
    if abs(w1[0] - w1[2]) > 1e-9 * scale or abs(w1[3] - w1[5]) > 1e-9 * scale:
        raise ConfigurationError("Morawetz weight: w' discontinuous at a knot")
    if abs(w2[0] - w2[2]) > 1e-9 or abs(w2[3] - w2[5]) > 1e-9:
        raise ConfigurationError("Morawetz weight: w'' discontinuous at a knot")
    dense = np.linspace(0.0, 3 * R, 3001)[1:]
    _, d1, d2, _ = weight_profile(dense, R)
    if np.any(d1 < 0) or np.any(d2 < -1e-14):
        raise ConfigurationError("Morawetz weight is not monotone and convex")


def make_weight(R: float, grid: RadialGrid) -> MorawetzWeight:
    if not (0 < R < grid.r_max / 4):
        raise ConfigurationError(f"Morawetz radius must satisfy 0 < R < r_max/4, got R={R}")
    _check_weight(R)
    w, w1, w2, _ = weight_profile(grid.nodes, R)
    if np.any(w2 < -1e-14):
        raise ConfigurationError("Morawetz weight convexity violated on the grid")
    lap, bilap = weight_laplacians(grid.nodes, R)
    knots = np.array([R, 2.0 * R])
    probe = (jv(grid.nu, np.outer(knots, grid.spectral_nodes)) * grid.spectral_weights) @ grid.forward_matrix
    probe.setflags(write=False)
    coeffs = 2.0 * np.pi * np.array([2.0, -4.0])
    return MorawetzWeight(R, grid, w, w1, w2, lap, bilap, probe, coeffs)


@lru_cache(maxsize=32)
def _cached_weight(R: float, grid: RadialGrid) -> MorawetzWeight:
    return make_weight(R, grid)


def _weight_for(u: RadialField, w: MorawetzWeight) -> MorawetzWeight:
    if w.grid is not u.grid:
        raise UsageError("Morawetz weight was built on a different grid")
    return w


def morawetz_action(u: RadialField, w: MorawetzWeight) -> float:
    """M_w = 2 int grad w . Im(conj(u) grad u) dx."""
    w = _weight_for(u, w)
    R = w.R
    return 2.0 * _integrate_local(u, lambda r, v, vr: weight_profile(r, R)[1] * np.imag(np.conj(v) * vr))


def morawetz_rhs_terms(u: RadialField, w: MorawetzWeight, p: float, a: float, lam: int) -> dict:
    """The four terms of d/dt M_w for i u_t = L_a u + lam |u|^p u (radial reduction).

    The angular part of the Hessian term vanishes identically for radial u.
    The bilaplacian term includes the point masses of Delta^2 w at the knots.
    """
    _check_sign(lam)
    w = _weight_for(u, w)
    R = w.R

    def bilap(r, v, vr):
        return weight_laplacians(r, R)[1] * np.abs(v) ** 2

    def hessian(r, v, vr):
        return weight_profile(r, R)[2] * np.abs(vr) ** 2

    def potential(r, v, vr):
        return np.abs(v) ** 2 * weight_profile(r, R)[1] / r**3

    def nonlinear(r, v, vr):
        return np.abs(v) ** (p + 2.0) * weight_laplacians(r, R)[0]

    knots = float(np.dot(w.knot_coeffs, np.abs(w.knot_probe @ u.values) ** 2))
    return {
        "bilaplacian": -_integrate_local(u, bilap) + knots,
        "hessian": 4.0 * _integrate_local(u, hessian),
        "potential": 4.0 * a * _integrate_local(u, potential),
        "nonlinear": MORAWETZ_NONLINEAR_SIGN * lam * 2.0 * p / (p + 2.0) * _integrate_local(u, nonlinear),
    }


def morawetz_rhs(u: RadialField, w: MorawetzWeight, p: float, a: float, lam: int) -> float:
    return float(sum(morawetz_rhs_terms(u, w, p, a, lam).values()))


# --- virial / local smoothing ------------------------------------------------------

def virial(u: RadialField) -> float:
    """V = Im int conj(u) d_r u dx."""
    return _integrate_local(u, lambda r, v, vr: np.imag(np.conj(v) * vr))


def local_smoothing_integrand(u: RadialField) -> float:
    """int |u|^2 / |x|^3 dx (finite when u ~ r^nu with nu > 1/2)."""
    return _integrate_local(u, lambda r, v, vr: np.abs(v) ** 2 / r**3)


def virial_rate(u: RadialField, p: float, a: float, lam: int) -> float:
    """Exact dV/dt for radial u: (2a - 1/2) int |u|^2/|x|^3 + lam p/(p+2) int |u|^{p+2}/|x|."""
    nonlinear = _integrate_local(u, lambda r, v, vr: np.abs(v) ** (p + 2.0) / r)
    return (2 * a - 0.5) * local_smoothing_integrand(u) + lam * p / (p + 2.0) * nonlinear


# --- interaction Morawetz observables ------------------------------------------------

@lru_cache(maxsize=16)
def _order0_tables(grid: RadialGrid):
    # Uniform k quadrature for int_0^K k^2 |g_hat_0(k)|^2 dk with K = k_max.
    # The nodal rule cannot resolve J_0(k r) beyond the grid bandwidth, and the
    # aliased tail, amplified by k^2, would dominate; resolved fields carry
    # negligible |u|^2 content past k_max.
    nk = 2 * grid.n
    kk = np.linspace(0.0, grid.k_max, nk + 1)
    wk = np.full(kk.shape, kk[1] - kk[0])
    wk[0] = wk[-1] = 0.5 * (kk[1] - kk[0])
    basis = jv(0, np.outer(kk, grid.nodes)) * grid.quad_weights[None, :]
    return kk, wk, basis


def frac_seminorm(u: RadialField) -> float:
    """|| |grad|^{1/2} (|u|^2) ||_{L^2}^2 = 2 pi int_0^inf k^2 |H_0[|u|^2](k)|^2 dk.

    H_0 is the order-0 Hankel transform, evaluated by the grid's quadrature;
    |u|^2 is radial whatever the phase of u.
    """
    kk, wk, basis = _order0_tables(u.grid)
    ghat = basis @ _dens(u)
    return float(2.0 * np.pi * np.dot(wk, kk**2 * ghat**2))


# --- Strichartz quotients --------------------------------------------------------------

def is_admissible(q: float, r: float) -> bool:
    """2/q + 2/r = 1 with 2 <= q, r <= inf."""
    if not (q >= 2 and r >= 2):
        return False
    return abs(2.0 / q + 2.0 / r - 1.0) < 1e-12


def strichartz_quotient(u0: RadialField, pair, horizon: float, samples: int = 400,
                        boundary_tolerance: float = 1e-6) -> tuple[float, bool]:
    """||exp(-it L_a) u0||_{L^q([0,T]; L^r)} / ||u0||_2 by time-sampled quadrature.

    Returns (quotient, contaminated) where ``contaminated`` flags boundary
    mass above tolerance at any sample time.
    """
    q, r = pair
    if not is_admissible(q, r):
        raise UsageError(f"({q}, {r}) is not an admissible pair")
    if not any(abs(q - a) < 1e-12 and abs(r - b) < 1e-12 for a, b in ADMISSIBLE_PAIRS):
        raise UsageError(f"pair ({q}, {r}) not in the supported set {ADMISSIBLE_PAIRS}")
    from .operators import boundary_mass_fraction

    g = u0.grid
    c0 = g.forward_matrix @ u0.values
    # Graded sampling: dense near t=0 where the solution changes fastest.
    s = np.linspace(0.0, 1.0, samples + 1)
    t = horizon * s**2
    vals = np.empty(t.shape)
    contaminated = False
    for i, ti in enumerate(t):
        ut = g.inverse_matrix @ (np.exp(PROPAGATOR_SIGN * 1j * ti * g.spectral_nodes**2) * c0)
        f = u0.with_values(ut)
        vals[i] = lp_norm(f, r) ** q
        if i % 20 == 0 or i == len(t) - 1:
            contaminated |= boundary_mass_fraction(f) > boundary_tolerance
    total = np.trapezoid(vals, t)
    return total ** (1.0 / q) / math.sqrt(mass(u0)), bool(contaminated)


# --- local conservation laws -------------------------------------------------------------

@dataclass
class PseudoStressReport:
    mass_residual: float  # sup |d_t T00 + div T0|
    momentum_residual: float  # sup |d_t T0 + div T + rho grad g|
    mass_scale: float
    momentum_scale: float

    @property
    def relative_mass_residual(self) -> float:
        return self.mass_residual / self.mass_scale if self.mass_scale else self.mass_residual

    @property
    def relative_momentum_residual(self) -> float:
        return self.momentum_residual / self.momentum_scale if self.momentum_scale else self.momentum_residual


def _interior(grid: RadialGrid, lo: float, hi: float) -> np.ndarray:
    r = grid.nodes
    return (r >= lo * grid.r_max) & (r <= hi * grid.r_max)


def pseudo_stress_check(snapshots, dt: float, p: float, lam: int,
                        interior=(0.02, 0.9)) -> PseudoStressReport:
    """Residuals of the local conservation laws at the middle of three snapshots.

    With rho = |u|^2, T00 = rho/2, T0 = Im(conj(u) u_r) and
    T_rr = 2 |u_r|^2 - Delta(rho)/2, the radial forms are

        d_t T00 + (1/r) d_r (r T0) = 0
        d_t T0 + (1/r) d_r (2 r |u_r|^2) - d_r Delta(rho)/2 = -rho d_r g,

    g = a/r^2 + lam |u|^p. Time derivatives are central differences, space
    derivatives spectral (product rule on u, u_r, u_rr, u_rrr).
    """
    u0, u1, u2 = snapshots
    if not (u0.grid is u1.grid is u2.grid):
        raise UsageError("snapshots must share a grid")
    _check_sign(lam)
    grid = u1.grid
    r = grid.nodes
    a = u1.a
    d1, d2, d3 = grid.derivative_matrices
    u = u1.values
    ur, urr, urrr = d1 @ u, d2 @ u, d3 @ u
    cu = np.conj(u)
    rho = np.abs(u) ** 2

    dt_t00 = 0.5 * (np.abs(u2.values) ** 2 - np.abs(u0.values) ** 2) / (2 * dt)
    div_t0 = np.imag(cu * (urr + ur / r))
    res_mass = dt_t00 + div_t0

    def current(v):
        return np.imag(np.conj(v.values) * (d1 @ v.values))

    dt_t0 = (current(u2) - current(u0)) / (2 * dt)
    rho1 = 2 * np.real(cu * ur)
    rho2 = 2 * np.abs(ur) ** 2 + 2 * np.real(cu * urr)
    rho3 = 6 * np.real(np.conj(ur) * urr) + 2 * np.real(cu * urrr)
    d_lap_rho = rho3 + rho2 / r - rho1 / r**2
    div_stress = 2 * np.abs(ur) ** 2 / r + 4 * np.real(np.conj(ur) * urr) - 0.5 * d_lap_rho
    absu = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_abs_p = np.where(absu > 0, 0.5 * p * absu ** (p - 2) * rho1, 0.0)
    dg = -2 * a / r**3 + lam * d_abs_p
    res_mom = dt_t0 + div_stress + rho * dg

    sel = _interior(grid, *interior)
    return PseudoStressReport(
        mass_residual=float(np.abs(res_mass[sel]).max()),
        momentum_residual=float(np.abs(res_mom[sel]).max()),
        mass_scale=float(np.abs(div_t0[sel]).max()),
        momentum_scale=float(np.abs(div_stress[sel]).max()),
    )


# --- per-sample record --------------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    hdot_a: float
    lp2: float
    ball_mass: float
    gn_quotient: float
    coercivity_margin: float
    morawetz_action: float
    morawetz_rhs: float
    virial: float
    local_smoothing_integrand: float
    frac_seminorm: float
    l8_norm: float
    ball_lp2: float
    boundary_mass: float
    scale_invariant_gradient: float

    def as_dict(self) -> dict:
        return asdict(self)


def record(u: RadialField, t: float, p: float, lam: int, R: float, s_p: float | None = None) -> DiagnosticsRecord:
    """Evaluate every tracked functional of ``u`` at time ``t``."""
    from .operators import boundary_mass_fraction

    g = u.grid
    if s_p is None:
        s_p = 1.0 - 2.0 / p
    h = sobolev_norm_a(u)
    m = mass(u)
    lp2 = lp_power(u, p + 2.0)
    nonzero = m > 0 and h > 0
    w = _cached_weight(float(R), g)
    chi = cutoff(g.nodes, R)[0]
    return DiagnosticsRecord(
        t=float(t),
        mass=m,
        energy=0.5 * h * h + lam / (p + 2.0) * lp2,
        hdot_a=h,
        lp2=lp2,
        ball_mass=cutoff_mass(u, R),
        gn_quotient=lp2 / (m * h**p) if nonzero else 0.0,
        coercivity_margin=(h * h - p / (p + 2.0) * lp2) / (h * h) if nonzero else 0.0,
        morawetz_action=morawetz_action(u, w),
        morawetz_rhs=morawetz_rhs(u, w, p, u.a, lam),
        virial=virial(u),
        local_smoothing_integrand=local_smoothing_integrand(u),
        frac_seminorm=frac_seminorm(u),
        l8_norm=l8_norm(u),
        ball_lp2=g.integrate(chi**2 * np.abs(u.values) ** (p + 2.0)),
        boundary_mass=boundary_mass_fraction(u),
        scale_invariant_gradient=math.sqrt(m) ** (1 - s_p) * h**s_p,
    )

"""The operator L_a = -Delta + a/|x|^2 on radial fields and its unitary group.

Sign convention: the linear flow of ``i u_t = L_a u`` is ``u(t) = exp(-i t L_a) u0``.
Every module uses this sign (``PROPAGATOR_SIGN``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import UsageError
from .grid import RadialField, RadialGrid

PROPAGATOR_SIGN = -1
ORACLE_MAX_N = 256


def apply_La(u: RadialField) -> RadialField:
    """Spectral application H^-1 (k^2 * H u)."""
    g = u.grid
    return u.with_values(g.inverse_matrix @ (g.spectral_nodes**2 * (g.forward_matrix @ u.values)))


@lru_cache(maxsize=64)
def propagator_matrix(grid: RadialGrid, t: float) -> np.ndarray:
    """Dense nodal matrix of exp(-i t L_a); cached for repeated time steps."""
    phase = np.exp(PROPAGATOR_SIGN * 1j * t * grid.spectral_nodes**2)
    m = grid.inverse_matrix @ (phase[:, None] * grid.forward_matrix)
    m.setflags(write=False)
    return m


def linear_propagate(u: RadialField, t: float) -> RadialField:
    if not math.isfinite(t):
        raise UsageError(f"propagation time must be finite, got {t}")
    if t == 0.0:
        return u.with_values(u.values.copy())
    g = u.grid
    phase = np.exp(PROPAGATOR_SIGN * 1j * t * g.spectral_nodes**2)
    return u.with_values(g.inverse_matrix @ (phase * (g.forward_matrix @ u.values)))


def fd_operator(grid: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Second-order finite-volume discretization of L_a on the grid nodes.

    Writing u = r^nu phi turns L_a into the radial Laplacian of dimension
    2 nu + 2 acting on the smooth function phi, with energy
    int |phi'|^2 r^(2 nu + 1) dr. That form is discretized with cell faces at
    node midpoints, a zero-flux face at the origin and phi(r_max) = 0.

    Returns ``(S, s)`` where ``S = M^-1/2 A M^-1/2`` is symmetric and
    ``s = sqrt(m) r^-nu`` maps nodal u to the orthonormal coordinates of S.
    """
    r = grid.nodes
    n = grid.n
    d = 2.0 * grid.nu + 2.0
    ext = np.append(r, grid.r_max)  # ghost node carrying the Dirichlet value
    faces = np.concatenate(([0.0], 0.5 * (ext[1:] + ext[:-1])))
    m = (faces[1:] ** d - faces[:-1] ** d) / d
    cond = faces[1:] ** (d - 1.0) / np.diff(ext)
    a_mat = np.zeros((n, n))
    idx = np.arange(n)
    a_mat[idx, idx] = cond + np.concatenate(([0.0], cond[:-1]))
    a_mat[idx[:-1], idx[:-1] + 1] = -cond[:-1]
    a_mat[idx[:-1] + 1, idx[:-1]] = -cond[:-1]
    s = 1.0 / np.sqrt(m)
    return s[:, None] * a_mat * s[None, :], np.sqrt(m) * r ** (-grid.nu)


@lru_cache(maxsize=16)
def _fd_eigh(grid: RadialGrid):
    sym, scale = fd_operator(grid)
    lam, vec = np.linalg.eigh(sym)
    return lam, vec, scale


def oracle_propagate(u: RadialField, t: float) -> RadialField:
    """Validation propagator: dense eigendecomposition of the finite-volume L_a."""
    if u.grid.n > ORACLE_MAX_N:
        raise UsageError(f"oracle_propagate refuses n={u.grid.n} > {ORACLE_MAX_N}")
    lam, vec, sm = _fd_eigh(u.grid)
    y = vec.T @ (sm * u.values)
    y = vec @ (np.exp(PROPAGATOR_SIGN * 1j * t * lam) * y)
    return u.with_values(y / sm)


def weighted_l2(u: RadialField) -> float:
    return math.sqrt(max(u.grid.integrate(np.abs(u.values) ** 2), 0.0))


def boundary_mass_fraction(u: RadialField, fraction: float = 0.1) -> float:
    g = u.grid
    dens = np.abs(u.values) ** 2
    total = np.dot(g.quad_weights, dens)
    if total == 0.0:
        return 0.0
    outer = g.outer_mask(fraction)
    return float(np.dot(g.quad_weights[outer], dens[outer]) / total)


@dataclass
class DecayProbe:
    """Sup-norm samples of the linear flow; ``contaminated`` flags boundary mass."""

    times: np.ndarray
    sup_norm: np.ndarray
    l2_norm: np.ndarray
    boundary_mass: np.ndarray
    tolerance: float = 1e-6
    contaminated: bool = field(init=False)

    def __post_init__(self):
        self.contaminated = bool(np.any(self.boundary_mass > self.tolerance))

    def fit_slope(self, t_lo: float | None = None, t_hi: float | None = None) -> float:
        """Least-squares slope of log sup_norm against log t on [t_lo, t_hi]."""
        sel = np.ones(self.times.shape, dtype=bool)
        if t_lo is not None:
            sel &= self.times >= t_lo
        if t_hi is not None:
            sel &= self.times <= t_hi
        if sel.sum() < 2:
            raise UsageError("need at least two probe times inside the fit window")
        return float(np.polyfit(np.log(self.times[sel]), np.log(self.sup_norm[sel]), 1)[0])

    def rows(self):
        return zip(self.times, self.sup_norm, self.l2_norm, self.boundary_mass)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "sup_norm", "l2_norm", "boundary_mass"])
            for row in self.rows():
                w.writerow([repr(float(x)) for x in row])


def dispersive_decay_probe(u0: RadialField, times, boundary_tolerance: float = 1e-6) -> DecayProbe:
    """Sample ||exp(-i t L_a) u0||_inf at the given (positive, increasing) times."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise UsageError("probe times must be positive and strictly increasing")
    sup, l2, bnd = [], [], []
    for t in times:
        ut = linear_propagate(u0, t)
        sup.append(np.abs(ut.values).max())
        l2.append(weighted_l2(ut))
        bnd.append(boundary_mass_fraction(ut))
    return DecayProbe(times, np.array(sup), np.array(l2), np.array(bnd), boundary_tolerance)

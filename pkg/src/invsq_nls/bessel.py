"""Zeros of J_nu for real order nu >= 0.

Function values come from ``scipy.special.jv`` (AMOS series/asymptotics).
Zeros are seeded with McMahon's expansion, polished by Newton, then checked
for bracketing and ordering. A scan-and-bisect fallback covers large orders,
where McMahon is poor for the first few zeros.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv, jvp

from .errors import ConfigurationError

ZERO_TOL = 1e-13


def mcmahon_guess(nu: float, m: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    beta = (m + 0.5 * nu - 0.25) * np.pi
    b8 = 8.0 * beta
    return (
        beta
        - (mu - 1.0) / b8
        - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8**3)
        - 32.0 * (mu - 1.0) * (83.0 * mu**2 - 982.0 * mu + 3779.0) / (15.0 * b8**5)
    )


def _newton(nu: float, x: np.ndarray, iters: int = 50) -> np.ndarray:
    x = x.copy()
    for _ in range(iters):
        step = jv(nu, x) / jvp(nu, x)
        x -= step
        if np.all(np.abs(step) <= ZERO_TOL * np.abs(x)):
            break
    return x


def _scan_zeros(nu: float, count: int) -> np.ndarray:
    # J_nu has no positive zeros below nu; consecutive zeros are > pi apart
    # (for nu > 1/2), so a step of 0.25 cannot skip one.
    out = []
    h = 0.25
    x0 = max(nu, 1e-3)
    f0 = jv(nu, x0)
    while len(out) < count:
        x1 = x0 + h
        f1 = jv(nu, x1)
        if f0 == 0.0:
            out.append(x0)
        elif f0 * f1 < 0.0:
            out.append(brentq(lambda x: jv(nu, x), x0, x1, xtol=1e-15, rtol=4e-16))
        x0, f0 = x1, f1
    return np.asarray(out[:count])


def _valid(nu: float, z: np.ndarray) -> bool:
    if not np.all(np.isfinite(z)) or z[0] <= 0.0:
        return False
    if np.any(np.diff(z) <= 0.5 * np.pi) or np.any(np.diff(z) >= 1.5 * np.pi + 1.0):
        return False
    # Each zero must be bracketed by a sign change of J_nu.
    d = 1e-7 * np.maximum(z, 1.0)
    if np.any(jv(nu, z - d) * jv(nu, z + d) >= 0.0):
        return False
    # The first zero must be the first: no sign change on (0, z0 - d).
    grid = np.linspace(max(nu, 1e-6), z[0] - d[0], 64)
    vals = jv(nu, grid)
    return bool(np.all(vals[1:] * vals[:-1] > 0.0))


def bessel_zeros(nu: float, count: int) -> np.ndarray:
    """First ``count`` positive zeros of J_nu, increasing."""
    if nu < 0 or count < 1:
        raise ConfigurationError(f"bessel_zeros needs nu >= 0 and count >= 1, got {nu}, {count}")
    m = np.arange(1, count + 1, dtype=float)
    z = _newton(nu, mcmahon_guess(nu, m))
    if _valid(nu, z):
        return z
    z = _newton(nu, _scan_zeros(nu, count))
    if not _valid(nu, z):
        raise ConfigurationError(f"Bessel zeros of order {nu} failed to converge")
    return z

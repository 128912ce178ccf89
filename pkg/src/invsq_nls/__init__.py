"""Numerical laboratory for the 2D radial NLS with an inverse-square potential.

    i u_t = L_a u + lam |u|^p u,    L_a = -Delta + a / |x|^2,

on radial fields, discretized by an order-sqrt(a) discrete Hankel transform.
"""

from .errors import ConfigurationError, InvSqError, NumericError, SolverFailure, UsageError
from .grid import RadialField, RadialGrid, build_grid, grid_for_potential

__all__ = [
    "ConfigurationError",
    "InvSqError",
    "NumericError",
    "RadialField",
    "RadialGrid",
    "SolverFailure",
    "UsageError",
    "build_grid",
    "grid_for_potential",
]
__version__ = "0.1.0"

"""Distributed null controls for shear-thickening flows.

Space-time finite-element solver for the null-control problem of a
power-law incompressible fluid: Carleman-weighted mixed formulation of
the linear Stokes control problem, wrapped in a frozen-derivative
Newton iteration for the nonlinear model.
"""

from .geometry import BoxDomain, Rect
from .weights import (
    CarlemanSetup, WeightExponents, build_setup, dominates, ell, mu, mu_dt,
    mu_log, named_weight,
)

__all__ = [
    "BoxDomain", "Rect",
    "CarlemanSetup", "WeightExponents", "build_setup", "dominates",
    "ell", "mu", "mu_dt", "mu_log", "named_weight",
]

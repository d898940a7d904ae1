"""Desk-scale numerical laboratory for widely degenerate parabolic p-Laplacian flows.

Subpackage map:

* :mod:`degenlab.maps`         -- nonlinear profiles, the regularized flux and its Hessian
* :mod:`degenlab.inequalities` -- randomized verification of the algebraic inequalities
* :mod:`degenlab.grid`         -- structured space-time grid and the adjoint gradient/divergence pair
* :mod:`degenlab.solver`       -- implicit-Euler / damped-Newton Cauchy-Dirichlet solver
* :mod:`degenlab.problems`     -- manufactured-problem catalog with a symbolic source oracle
* :mod:`degenlab.seminorms`    -- discrete Lebesgue, Gagliardo, Besov and Nikolskii estimators
* :mod:`degenlab.sweeps`       -- eps-sweep harness probing the uniform estimates
* :mod:`degenlab.cli`          -- configuration-file driven command line entry point
"""

from .errors import (
    CatalogError,
    ConfigError,
    InsufficientDataError,
    InvalidInputError,
    NewtonError,
    QuadratureError,
    RegionError,
    ShiftError,
)
from .maps import (
    DEFAULT_QUAD,
    DegenParams,
    QuadratureConfig,
    default_alpha,
    energy,
    flux,
    flux_jacobian,
    g_profile,
    h_gamma,
    phi_weight,
    v_map,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DegenParams",
    "QuadratureConfig",
    "DEFAULT_QUAD",
    "default_alpha",
    "h_gamma",
    "g_profile",
    "v_map",
    "energy",
    "flux",
    "flux_jacobian",
    "phi_weight",
    "InvalidInputError",
    "QuadratureError",
    "NewtonError",
    "RegionError",
    "ShiftError",
    "InsufficientDataError",
    "CatalogError",
    "ConfigError",
]

"""Manufactured-problem catalog.

Entries:

* ``heat_sine``    -- p = 2, lam = 0: decaying sine product, the exact solution
  of the (1+eps)-diffusivity heat equation with f = 0.
* ``linear_drift`` -- affine reference with |Du| <= lam and f = 0; exactly
  stationary for every eps (the flux of a constant gradient is constant).
* ``cone``         -- u = lam |x - x0| with the vertex half a cell off the node
  lattice; stationary degenerate solution of the unregularized equation
  (every lam-Lipschitz function solves the homogeneous problem).
* ``mms_smooth``   -- u = (1+t) sin(pi x/L) sin(pi y/L) with the source
  f = u_t - div H_{p-1}(Du) produced by an independent symbolic-differentiation
  oracle evaluated pointwise.
"""

from __future__ import annotations

import math

import numpy as np
import sympy as sp

from .errors import CatalogError, InvalidInputError
from .grid import SpaceTimeGrid
from .maps import DegenParams
from .solver import ProblemSpec

__all__ = ["manufactured_problem", "CATALOG_NAMES", "mms_source_oracle"]

CATALOG_NAMES = ("heat_sine", "linear_drift", "cone", "mms_smooth")


def _sym_derivatives(length: float):
    """Numpy-callable t, x, y derivatives of (1+t) sin(pi x/L) sin(pi y/L)."""
    x, y, t = sp.symbols("x y t", real=True)
    u = (1 + t) * sp.sin(sp.pi * x / length) * sp.sin(sp.pi * y / length)
    names = {
        "u": u,
        "ut": sp.diff(u, t),
        "ux": sp.diff(u, x),
        "uy": sp.diff(u, y),
        "uxx": sp.diff(u, x, 2),
        "uxy": sp.diff(u, x, y),
        "uyy": sp.diff(u, y, 2),
    }
    return {k: sp.lambdify((x, y, t), expr, "numpy") for k, expr in names.items()}


def mms_source_oracle(params: DegenParams, length: float = 1.0):
    """Pointwise source f = u_t - div H_{p-1}(Du) for the mms_smooth solution.

    The divergence of the radial flux phi(r) Du/r with phi(r) = (r-lam)_+^{p-1}
    expands to phi'(r) X + (phi(r)/r) (lap u - X), where
    X = <Du, D^2u Du>/r^2; both coefficients vanish continuously as r -> lam_+
    (and as r -> 0 when lam = 0, p > 2), which the evaluation guards make
    explicit.
    """
    d = _sym_derivatives(length)
    p, lam = params.p, params.lam

    def source(x, y, t):
        x = np.asarray(x, dtype=float)
        ut = d["ut"](x, y, t)
        ux = d["ux"](x, y, t)
        uy = d["uy"](x, y, t)
        uxx = d["uxx"](x, y, t)
        uxy = d["uxy"](x, y, t)
        uyy = d["uyy"](x, y, t)
        lap = uxx + uyy
        if p == 2.0 and lam == 0.0:
            return ut - lap
        r = np.hypot(ux, uy)
        r2 = np.where(r > 0.0, r * r, 1.0)
        radial = (ux * ux * uxx + 2.0 * ux * uy * uxy + uy * uy * uyy) / r2
        excess = np.maximum(r - lam, 0.0)
        active = r > lam
        phi_over_r = np.where(active, excess ** (p - 1.0) / np.where(r > 0, r, 1.0), 0.0)
        phi_prime = np.where(active, (p - 1.0) * excess ** (p - 2.0), 0.0)
        div_flux = phi_prime * radial + phi_over_r * (lap - radial)
        return ut - div_flux

    def exact(x, y, t):
        return d["u"](x, y, t)

    return source, exact


def manufactured_problem(
    name: str, grid: SpaceTimeGrid, params: DegenParams
) -> ProblemSpec:
    """Catalog lookup; raises :class:`CatalogError` for unknown names."""
    length = grid.length
    if name == "heat_sine":
        if params.p != 2.0 or params.lam != 0.0:
            raise InvalidInputError("heat_sine requires p = 2 and lambda = 0")
        rate = 2.0 * (1.0 + params.eps) * (math.pi / length) ** 2

        def reference(x, y, t):
            return (
                np.exp(-rate * t)
                * np.sin(math.pi * x / length)
                * np.sin(math.pi * y / length)
            )

        return ProblemSpec(grid, params, reference, None, name, exact=True)

    if name == "linear_drift":
        slope = params.lam / 2.0

        def reference(x, y, t):
            return slope * x + 0.0 * y

        return ProblemSpec(grid, params, reference, None, name, exact=True)

    if name == "cone":
        if params.lam <= 0.0:
            raise InvalidInputError("cone requires lambda > 0")
        h = grid.h
        i0 = grid.cells // 2
        x0 = i0 * h + 0.5 * h
        y0 = i0 * h
        lam = params.lam

        def reference(x, y, t):
            return lam * np.hypot(x - x0, y - y0) + 0.0 * t

        return ProblemSpec(grid, params, reference, None, name, exact=True)

    if name == "mms_smooth":
        source, exact = mms_source_oracle(params, length)
        return ProblemSpec(grid, params, exact, source, name, exact=True)

    raise CatalogError(name)

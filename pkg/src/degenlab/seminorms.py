"""Discrete estimators for the norms and seminorms the a priori estimates use.

Regions are backward parabolic cylinders Q_rho(z0) = B_rho(x0) x (t0-rho^2, t0]
discretized by node-center (or cell-center) inclusion masks; all space-time
integrals are midpoint sums with weights h^2 tau.  Ball-mask discretization
error is O(h) and every consumer's tolerance absorbs it.

Fractional smoothness is measured three ways: the Gagliardo double sum, the
difference-characterized Besov seminorm on log-spaced radial shells, and a
Nikolskii exponent fitted from dyadic finite-difference sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidInputError,
    RegionError,
    ShiftError,
)
from .grid import SpaceTimeGrid, discrete_gradient
from .maps import DegenParams, v_map_batch

__all__ = [
    "Cylinder",
    "SmoothnessOrder",
    "default_cylinders",
    "lp_norm_cylinder",
    "sup_l2_in_time",
    "finite_difference",
    "gagliardo_seminorm",
    "besov_seminorm",
    "parabolic_besov_norm",
    "nikolskii_fit",
    "grad_l2_of_v",
]

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class Cylinder:
    """Backward parabolic cylinder with vertex (center, t0) and width rho."""

    center: tuple[float, float]
    t0: float
    rho: float

    def __post_init__(self):
        if self.rho <= 0.0:
            raise InvalidInputError("cylinder radius must be positive")

    def validate_inside(self, grid: SpaceTimeGrid, margin_cells: int = 0) -> None:
        pad = margin_cells * grid.h
        cx, cy = self.center
        if (
            cx - self.rho < -_TIME_TOL + pad
            or cy - self.rho < -_TIME_TOL + pad
            or cx + self.rho > grid.length + _TIME_TOL - pad
            or cy + self.rho > grid.length + _TIME_TOL - pad
        ):
            raise RegionError(
                f"ball of radius {self.rho} at {self.center} escapes the grid box"
            )
        tol = _TIME_TOL * max(grid.tau, 1.0)
        if self.t0 - self.rho**2 < grid.t_start - tol or self.t0 > grid.t_end + tol:
            raise RegionError(
                f"time window ({self.t0 - self.rho ** 2}, {self.t0}] escapes "
                f"({grid.t_start}, {grid.t_end})"
            )

    def node_mask(self, grid: SpaceTimeGrid) -> np.ndarray:
        X, Y = grid.node_mesh()
        return (X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2 < self.rho**2

    def cell_mask(self, grid: SpaceTimeGrid) -> np.ndarray:
        X, Y = grid.cell_mesh()
        return (X - self.center[0]) ** 2 + (Y - self.center[1]) ** 2 < self.rho**2

    def level_mask(self, grid: SpaceTimeGrid) -> np.ndarray:
        times = grid.times
        tol = _TIME_TOL * max(grid.tau, 1.0)
        return (times > self.t0 - self.rho**2 - tol) & (times <= self.t0 + tol)

    def shrunk(self, factor: float) -> "Cylinder":
        return Cylinder(self.center, self.t0, self.rho * factor)


def default_cylinders(grid: SpaceTimeGrid) -> tuple[Cylinder, Cylinder, Cylinder]:
    """Nested Q_r in Q_rho in Q_R with radii (0.2, 0.3, 0.4) L, vertex at the final time."""
    center = (0.5 * grid.length, 0.5 * grid.length)
    return (
        Cylinder(center, grid.t_end, 0.2 * grid.length),
        Cylinder(center, grid.t_end, 0.3 * grid.length),
        Cylinder(center, grid.t_end, 0.4 * grid.length),
    )


@dataclass(frozen=True)
class SmoothnessOrder:
    """Fractional order s in (0,1), integrability p, summability q, shift cutoff r."""

    s: float
    p: float
    q: float = 1.0
    r_cutoff: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise InvalidInputError("fractional order must lie in (0, 1)")
        if self.p < 1.0:
            raise InvalidInputError("integrability exponent must be >= 1")
        if self.q < 1.0:
            raise InvalidInputError("summability exponent must be >= 1")
        if self.r_cutoff <= 0.0:
            raise InvalidInputError("shift cutoff must be positive")


def _magnitude(values: np.ndarray) -> np.ndarray:
    if values.ndim >= 1 and values.shape[-1] == 2 and values.ndim in (3, 4):
        return np.linalg.norm(values, axis=-1)
    return np.abs(values)


def lp_norm_cylinder(
    values: np.ndarray,
    grid: SpaceTimeGrid,
    cyl: Cylinder,
    p: float,
    where: str = "nodes",
) -> float:
    """Space-time L^p norm over the discrete cylinder (midpoint rule).

    ``values`` is a trajectory of node scalars (levels, N+1, N+1), of cell
    vectors (levels, N, N, 2), or the corresponding single-slice arrays (the
    slice is then treated as time-constant over the window).
    """
    if p < 1.0:
        raise InvalidInputError("p must be >= 1")
    cyl.validate_inside(grid)
    mag = _magnitude(np.asarray(values, dtype=float))
    mask = cyl.node_mask(grid) if where == "nodes" else cyl.cell_mask(grid)
    levels = cyl.level_mask(grid)
    if mag.ndim == 2:
        mag = np.broadcast_to(mag, (grid.steps + 1,) + mag.shape)
    total = np.sum(mag[levels][:, mask] ** p) * grid.h**2 * grid.tau
    return float(total ** (1.0 / p))


def sup_l2_in_time(values: np.ndarray, grid: SpaceTimeGrid, cyl: Cylinder) -> float:
    """Max over levels in the window of the spatial L^2 norm over the ball."""
    cyl.validate_inside(grid)
    mag = _magnitude(np.asarray(values, dtype=float))
    mask = cyl.node_mask(grid)
    levels = cyl.level_mask(grid)
    per_level = np.sqrt(np.sum(mag[levels][:, mask] ** 2, axis=1) * grid.h**2)
    return float(per_level.max())


def finite_difference(
    field: np.ndarray, direction: int, shift: float, spacing: float
) -> tuple[np.ndarray, np.ndarray]:
    """Finite difference tau_h F = F(x + h e_j) - F(x) and quotient tau_h F / h.

    ``shift`` must be a (signed) integer multiple of ``spacing``; the result is
    defined on the window of points whose shifted partner stays on the grid
    (the discrete analog of dist(x, boundary) > |h|).  The discrete Leibniz
    identity D_h(FG)(x) = F(x+h e_j) D_h G(x) + G(x) D_h F(x) holds exactly.
    """
    field = np.asarray(field, dtype=float)
    if direction not in (0, 1):
        raise InvalidInputError("direction must be 0 (x) or 1 (y)")
    cells = shift / spacing
    m = round(cells)
    if m == 0 or abs(cells - m) > 1e-9:
        raise ShiftError(f"shift {shift} is not a nonzero multiple of {spacing}")
    if abs(m) >= field.shape[direction]:
        raise ShiftError(f"shift {shift} exceeds the field extent")
    src = [slice(None)] * field.ndim
    dst = [slice(None)] * field.ndim
    if m > 0:
        src[direction] = slice(m, None)
        dst[direction] = slice(None, -m)
    else:
        src[direction] = slice(None, m)
        dst[direction] = slice(-m, None)
    tau = field[tuple(src)] - field[tuple(dst)]
    return tau, tau / shift


def gagliardo_seminorm(
    field: np.ndarray,
    grid: SpaceTimeGrid,
    order: SmoothnessOrder,
    mask: np.ndarray | None = None,
    chunk: int = 1024,
) -> float:
    """Double node sum ( sum_{x != y} |v(x)-v(y)|^q / |x-y|^{n+sq} h^4 )^{1/q}.

    The diagonal is excluded (equivalently |x-y| >= h); cost is O(K^2) over the
    K masked nodes, accepted at desk scale.
    """
    field = np.asarray(field, dtype=float)
    X, Y = grid.node_mesh()
    if mask is None:
        mask = np.ones_like(field, dtype=bool)
    pts = np.stack([X[mask], Y[mask]], axis=-1)
    vals = field[mask]
    k = pts.shape[0]
    q, s = order.p, order.s
    expo = 2.0 + s * q
    total = 0.0
    for i0 in range(0, k, chunk):
        block_p = pts[i0 : i0 + chunk]
        block_v = vals[i0 : i0 + chunk]
        d2 = np.sum((block_p[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        with np.errstate(divide="ignore"):
            w = np.where(d2 > 0.0, d2 ** (-0.5 * expo), 0.0)
        total += np.sum(np.abs(block_v[:, None] - vals[None, :]) ** q * w)
    return float((total * grid.h**4) ** (1.0 / q))


def _bilinear_zero_extended(
    field: np.ndarray, grid: SpaceTimeGrid, pad: int, hx: float, hy: float
) -> np.ndarray:
    """Sample the zero-extended node field at (node + (hx, hy)) over the padded lattice."""
    n = grid.cells
    h = grid.h
    big = np.zeros((n + 1 + 4 * pad, n + 1 + 4 * pad))
    big[2 * pad : 2 * pad + n + 1, 2 * pad : 2 * pad + n + 1] = field
    # evaluation points: padded lattice indices offset by the shift
    fx = np.arange(pad, pad + n + 1 + 2 * pad) + hx / h
    fy = np.arange(pad, pad + n + 1 + 2 * pad) + hy / h
    ix = np.floor(fx).astype(int)
    iy = np.floor(fy).astype(int)
    wx = fx - ix
    wy = fy - iy
    ix = np.clip(ix, 0, big.shape[0] - 2)
    iy = np.clip(iy, 0, big.shape[1] - 2)
    v00 = big[np.ix_(ix, iy)]
    v10 = big[np.ix_(ix + 1, iy)]
    v01 = big[np.ix_(ix, iy + 1)]
    v11 = big[np.ix_(ix + 1, iy + 1)]
    wxc = wx[:, None]
    wyc = wy[None, :]
    return (
        v00 * (1 - wxc) * (1 - wyc)
        + v10 * wxc * (1 - wyc)
        + v01 * (1 - wxc) * wyc
        + v11 * wxc * wyc
    )


def _shell_grid(h: float, r_cutoff: float, shells_per_decade: int, angles: int):
    if r_cutoff <= h:
        raise InvalidInputError("shift cutoff must exceed the grid spacing")
    decades = math.log10(r_cutoff / h)
    count = max(3, int(math.ceil(shells_per_decade * decades)) + 1)
    radii = np.geomspace(h, r_cutoff, count)
    lnr = np.log(radii)
    w = np.zeros_like(lnr)
    w[1:-1] = 0.5 * (lnr[2:] - lnr[:-2])
    w[0] = 0.5 * (lnr[1] - lnr[0])
    w[-1] = 0.5 * (lnr[-1] - lnr[-2])
    theta = np.arange(angles) * 2.0 * math.pi / angles
    return radii, w, theta, 2.0 * math.pi / angles


def besov_seminorm(
    field: np.ndarray,
    grid: SpaceTimeGrid,
    order: SmoothnessOrder,
    shells_per_decade: int = 8,
    angles: int = 16,
) -> float:
    """Difference-characterized Besov seminorm of a zero-extended node field.

    The shift integral over {|h| < r} is evaluated on log-spaced radial shells
    times uniform angles (trapezoid in ln|h|); each shell carries
    ( integral |delta_h v|^p dx )^{1/p} / |h|^s, with delta_h sampled by
    bilinear interpolation of the zero extension.  For q = infinity the shell
    maximum is returned.
    """
    field = np.asarray(field, dtype=float)
    h = grid.h
    radii, wlog, theta, wtheta = _shell_grid(h, order.r_cutoff, shells_per_decade, angles)
    pad = int(math.ceil(order.r_cutoff / h)) + 1
    n = grid.cells
    base = np.zeros((n + 1 + 2 * pad, n + 1 + 2 * pad))
    base[pad : pad + n + 1, pad : pad + n + 1] = field
    pp = order.p
    q = order.q
    acc = 0.0
    worst = 0.0
    for rho_i, wl in zip(radii, wlog):
        for th in theta:
            hx = rho_i * math.cos(th)
            hy = rho_i * math.sin(th)
            shifted = _bilinear_zero_extended(field, grid, pad, hx, hy)
            delta = shifted - base
            inner = np.sum(np.abs(delta) ** pp) * h * h
            shell = inner ** (1.0 / pp) / rho_i**order.s
            if math.isinf(q):
                worst = max(worst, shell)
            else:
                acc += shell**q * wl * wtheta
    if math.isinf(q):
        return float(worst)
    return float(acc ** (1.0 / q))


def parabolic_besov_norm(
    traj: np.ndarray,
    grid: SpaceTimeGrid,
    cyl: Cylinder,
    s: float,
    pprime: float,
) -> float:
    """Bochner norm ( sum_levels (||f(t)||_{L^p'(ball)} + [f(t)]_{B^s_{p',1}})^{p'} tau )^{1/p'}.

    The summability index is fixed to q = 1 (the datum class); the spatial
    field is restricted to the ball and extended by zero.
    """
    cyl.validate_inside(grid)
    traj = np.asarray(traj, dtype=float)
    order = SmoothnessOrder(s, pprime, 1.0, r_cutoff=cyl.rho / 4.0)
    mask = cyl.node_mask(grid)
    levels = np.nonzero(cyl.level_mask(grid))[0]
    total = 0.0
    for k in levels:
        slice_k = np.where(mask, traj[k], 0.0)
        lp = (np.sum(np.abs(slice_k[mask]) ** pprime) * grid.h**2) ** (1.0 / pprime)
        semi = besov_seminorm(slice_k, grid, order)
        total += (lp + semi) ** pprime * grid.tau
    return float(total ** (1.0 / pprime))


def nikolskii_fit(
    values: np.ndarray,
    grid: SpaceTimeGrid,
    cyl: Cylinder,
    q: float,
    shifts: tuple[int, ...] = (1, 2, 4, 8),
) -> tuple[float, str]:
    """Least-squares Nikolskii exponent from dyadic finite-difference sums.

    Fits log( sum_j integral_cyl |tau_{j,h} F|^q dz ) against q log|h| over the
    grid-aligned shifts (in cells) and clips the slope to [0, 1]; a uniform
    bound on those sums certifies membership in W^{beta,q} for beta below the
    exponent.  Returns (theta, flag) with flag "" or "degenerate" (constant
    field); fewer than two usable shifts raises InsufficientDataError.
    """
    values = np.asarray(values, dtype=float)
    cyl.validate_inside(grid)
    if len(shifts) < 2:
        raise InsufficientDataError("need at least two shifts")
    if values.ndim == 3:
        where = "nodes"
        mask = cyl.node_mask(grid)
    elif values.ndim == 4 and values.shape[-1] == 2:
        where = "cells"
        mask = cyl.cell_mask(grid)
    else:
        raise InvalidInputError("expected a node-scalar or cell-vector trajectory")
    levels = cyl.level_mask(grid)
    sub = values[levels]
    h = grid.h
    sums = []
    log_h = []
    for m in shifts:
        if m <= 0:
            raise ShiftError("shifts must be positive cell counts")
        total = 0.0
        usable = False
        for axis in (1, 2):
            if m >= sub.shape[axis]:
                continue
            src = [slice(None)] * sub.ndim
            dst = [slice(None)] * sub.ndim
            src[axis] = slice(m, None)
            dst[axis] = slice(None, -m)
            tau_f = sub[tuple(src)] - sub[tuple(dst)]
            mask_window = [slice(None)] * (mask.ndim)
            mask_window[axis - 1] = slice(None, -m)
            mcrop = mask[tuple(mask_window)]
            mag = _magnitude(tau_f)
            total += np.sum((mag**q) * mcrop[None, ...]) * h * h * grid.tau
            usable = True
        if usable:
            sums.append(total)
            log_h.append(q * math.log(m * h))
    if len(sums) < 2:
        raise InsufficientDataError("fewer than two usable shifts")
    sums = np.asarray(sums)
    log_h = np.asarray(log_h)
    if np.any(sums <= 0.0):
        return 1.0, "degenerate"
    slope = np.polyfit(log_h, np.log(sums), 1)[0]
    return float(min(1.0, max(0.0, slope))), ""


def grad_l2_of_v(
    traj: np.ndarray,
    grid: SpaceTimeGrid,
    params: DegenParams,
    cyl: Cylinder,
) -> float:
    """integral over the cylinder of |D_x V(grad u)|^2 dz (squared Frobenius norm).

    V is evaluated at cell centers from the staggered gradient of each level;
    its spatial derivatives are central differences on the cell lattice, so the
    ball needs a one-cell margin inside the grid.
    """
    traj = np.asarray(traj, dtype=float)
    cyl.validate_inside(grid, margin_cells=1)
    h = grid.h
    mask = cyl.cell_mask(grid)[1:-1, 1:-1]
    levels = np.nonzero(cyl.level_mask(grid))[0]
    total = 0.0
    for k in levels:
        v = v_map_batch(discrete_gradient(traj[k], h), params)
        dvx = (v[2:, 1:-1, :] - v[:-2, 1:-1, :]) / (2.0 * h)
        dvy = (v[1:-1, 2:, :] - v[1:-1, :-2, :]) / (2.0 * h)
        frob = np.sum(dvx**2 + dvy**2, axis=-1)
        total += np.sum(frob[mask]) * h * h * grid.tau
    return float(total)

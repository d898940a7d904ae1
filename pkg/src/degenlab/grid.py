"""Structured space-time grid and the adjoint gradient/divergence pair.

Scalar fields live at the (N+1)^2 nodes of the square [0, L]^2, vector fields
at the N^2 cell centers (staggered so the full gradient vector is available
pointwise for the nonlinear flux).  The gradient takes forward differences of
the four cell corners to the center; the divergence is minus its adjoint
(backward differences to the nodes), so summation by parts

    <div F, v> h^2 = -<F, grad v> h^2

holds exactly for v vanishing on the boundary.  Second differences of
quadratics are exact at interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "SpaceTimeGrid",
    "Trajectory",
    "discrete_gradient",
    "discrete_divergence",
    "sample_nodes",
    "interior",
    "boundary_mask",
]


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform N x N cells on [0, L]^2 and M implicit steps on [t_start, t_end]."""

    length: float
    cells: int
    t_start: float
    t_end: float
    steps: int

    def __post_init__(self):
        if self.cells < 4:
            raise InvalidInputError(f"need at least 4 cells per side, got {self.cells}")
        if self.steps < 1:
            raise InvalidInputError(f"need at least 1 time step, got {self.steps}")
        if not self.length > 0.0:
            raise InvalidInputError("domain size must be positive")
        if not self.t_end > self.t_start:
            raise InvalidInputError("time interval must have positive length")

    @property
    def h(self) -> float:
        return self.length / self.cells

    @property
    def tau(self) -> float:
        return (self.t_end - self.t_start) / self.steps

    @property
    def node_coords(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.cells + 1)

    @property
    def cell_coords(self) -> np.ndarray:
        return (np.arange(self.cells) + 0.5) * self.h

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.steps + 1)

    def node_mesh(self):
        c = self.node_coords
        return np.meshgrid(c, c, indexing="ij")

    def cell_mesh(self):
        c = self.cell_coords
        return np.meshgrid(c, c, indexing="ij")


@dataclass
class Trajectory:
    """Time-indexed field values: (M+1, N+1, N+1) node scalars or (M+1, N, N, 2) cell vectors."""

    grid: SpaceTimeGrid
    values: np.ndarray
    kind: str = "node_scalar"

    def __post_init__(self):
        n = self.grid.cells
        m = self.grid.steps
        if self.kind == "node_scalar":
            expected = (m + 1, n + 1, n + 1)
        elif self.kind == "cell_vector":
            expected = (m + 1, n, n, 2)
        else:
            raise InvalidInputError(f"unknown trajectory kind {self.kind!r}")
        if self.values.shape != expected:
            raise InvalidInputError(
                f"trajectory shape {self.values.shape} does not match {expected}"
            )


def discrete_gradient(u: np.ndarray, h: float) -> np.ndarray:
    """Cell-centered gradient of a node field, shape (N, N, 2).

    Component x averages the two forward x-differences of the cell's corner
    values (and symmetrically for y); exact for affine fields.
    """
    gx = (u[1:, :-1] + u[1:, 1:] - u[:-1, :-1] - u[:-1, 1:]) / (2.0 * h)
    gy = (u[:-1, 1:] + u[1:, 1:] - u[:-1, :-1] - u[1:, :-1]) / (2.0 * h)
    return np.stack([gx, gy], axis=-1)


def discrete_divergence(F: np.ndarray, h: float) -> np.ndarray:
    """Node divergence of a cell-centered vector field, shape (N+1, N+1).

    Defined as minus the adjoint of :func:`discrete_gradient` (cells outside
    the grid count as zero), which makes the pair an exact summation-by-parts
    couple under zero boundary data.
    """
    fxp = np.pad(F[..., 0], 1)
    fyp = np.pad(F[..., 1], 1)
    term_x = fxp[1:, 1:] + fxp[1:, :-1] - fxp[:-1, 1:] - fxp[:-1, :-1]
    term_y = fyp[1:, 1:] + fyp[:-1, 1:] - fyp[1:, :-1] - fyp[:-1, :-1]
    return (term_x + term_y)[: F.shape[0] + 1, : F.shape[1] + 1] / (2.0 * h)


def sample_nodes(func, grid: SpaceTimeGrid, t: float) -> np.ndarray:
    """Evaluate func(x, y, t) on the node mesh."""
    X, Y = grid.node_mesh()
    return np.asarray(func(X, Y, t), dtype=float)


def interior(u: np.ndarray) -> np.ndarray:
    return u[1:-1, 1:-1]


def boundary_mask(n_nodes: int) -> np.ndarray:
    mask = np.zeros((n_nodes, n_nodes), dtype=bool)
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
    return mask

"""Trajectory serialization: flat binary arrays with a JSON sidecar.

The binary file holds the raw float64 buffer in C order; the sidecar (same
path + ``.json``) records shape, dtype, field kind, grid box and parameters,
so a trajectory round-trips bit-exactly together with its discretization.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .grid import SpaceTimeGrid, Trajectory
from .maps import DegenParams

__all__ = ["save_trajectory", "load_trajectory", "sidecar_path"]


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_trajectory(
    traj: Trajectory, path, params: DegenParams | None = None
) -> None:
    path = Path(path)
    values = np.ascontiguousarray(traj.values, dtype=np.float64)
    values.tofile(path)
    meta = {
        "dtype": "float64",
        "order": "C",
        "shape": list(values.shape),
        "kind": traj.kind,
        "grid": {
            "length": traj.grid.length,
            "cells": traj.grid.cells,
            "t_start": traj.grid.t_start,
            "t_end": traj.grid.t_end,
            "steps": traj.grid.steps,
        },
    }
    if params is not None:
        meta["params"] = {
            "p": params.p,
            "lambda": params.lam,
            "alpha": params.alpha,
            "eps": params.eps,
        }
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_trajectory(path) -> tuple[Trajectory, DegenParams | None]:
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise InvalidInputError(f"missing sidecar {side}")
    with open(side) as fh:
        meta = json.load(fh)
    if meta.get("dtype") != "float64":
        raise InvalidInputError(f"unsupported dtype {meta.get('dtype')}")
    values = np.fromfile(path, dtype=np.float64).reshape(meta["shape"])
    g = meta["grid"]
    grid = SpaceTimeGrid(g["length"], g["cells"], g["t_start"], g["t_end"], g["steps"])
    traj = Trajectory(grid, values, meta.get("kind", "node_scalar"))
    params = None
    if "params" in meta:
        q = meta["params"]
        params = DegenParams(q["p"], q["lambda"], q["alpha"], q["eps"])
    return traj, params

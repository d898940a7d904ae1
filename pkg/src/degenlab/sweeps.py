"""Eps-sweep harness probing the uniform energy, comparison, Sobolev and
time-derivative estimates on the manufactured catalog.

The unknown constants of the continuum estimates are never reproduced; what is
falsifiable at desk scale is (i) eps-uniformity of left/right-side ratios
(bounded max/min spread), (ii) the decay shape of the comparison quantity
(log-log slope over the last three eps), and (iii) non-negativity and
reproducibility of every recorded quantity.  Slope targets apply only to
catalog problems whose datum is smooth or zero: the mollification error has a
guaranteed limit but no rate for rough sources.

Degenerate data is possible and meaningful: a stationary reference whose
V-field vanishes identically yields exactly-zero columns (the estimates hold
in the strongest form).  Fits then report slope = +inf with the ``zero-floor``
flag, and spreads over all-zero columns report 1.0 with the ``all-zero`` flag.
Conversely, when the reference is a smooth exact solution the comparison
quantity saturates at the (eps-independent) discretization floor rather than
decaying to zero; only exact discrete references expose the eps-rate.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidInputError, NewtonError
from .grid import SpaceTimeGrid, discrete_gradient, sample_nodes
from .maps import DegenParams, h_gamma_batch, v_map_batch
from .problems import manufactured_problem
from .seminorms import (
    Cylinder,
    default_cylinders,
    grad_l2_of_v,
    lp_norm_cylinder,
    nikolskii_fit,
    parabolic_besov_norm,
    sup_l2_in_time,
)
from .solver import NewtonConfig, mollify_source, solve_cauchy_dirichlet

__all__ = [
    "SweepSpec",
    "SweepRow",
    "SweepReport",
    "ROW_FIELDS",
    "compute_rows",
    "run_energy_sweep",
    "run_comparison_sweep",
    "run_sobolev_sweep",
    "run_time_derivative_check",
    "run_fractional_check",
    "fit_loglog_slope",
    "positive_spread",
    "rows_to_csv",
    "write_manifest",
]

ROW_FIELDS = (
    "eps",
    "energy_lhs",
    "energy_rhs",
    "comparison_lhs",
    "comparison_rhs",
    "v_l2_sq",
    "sobolev_quantity",
    "sobolev_bound",
    "mollification_error",
    "time_derivative_lp",
    "time_derivative_rhs",
    "nikolskii_theta",
    "du_lp_p",
    "oldtrick_rhs",
    "newton_converged",
)


@dataclass(frozen=True)
class SweepSpec:
    """An eps-sweep instance: catalog problem, grid, nested cylinders, eps list."""

    problem: str
    grid: SpaceTimeGrid
    params: DegenParams
    eps_list: tuple[float, ...]
    cylinders: tuple[Cylinder, Cylinder, Cylinder] | None = None
    newton: NewtonConfig = NewtonConfig()

    def __post_init__(self):
        eps = self.eps_list
        if any(not 0.0 < e <= 1.0 for e in eps):
            raise InvalidInputError("all eps must lie in (0, 1]")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise InvalidInputError("eps_list must be strictly decreasing")
        if self.cylinders is None:
            object.__setattr__(self, "cylinders", default_cylinders(self.grid))
        small, mid, big = self.cylinders
        if not small.rho < mid.rho < big.rho:
            raise InvalidInputError("cylinders must nest: r < rho < R")
        big.validate_inside(self.grid)


@dataclass
class SweepRow:
    eps: float
    energy_lhs: float = math.nan
    energy_rhs: float = math.nan
    comparison_lhs: float = math.nan
    comparison_rhs: float = math.nan
    v_l2_sq: float = math.nan
    sobolev_quantity: float = math.nan
    sobolev_bound: float = math.nan
    mollification_error: float = math.nan
    time_derivative_lp: float = math.nan
    time_derivative_rhs: float = math.nan
    nikolskii_theta: float = math.nan
    du_lp_p: float = math.nan
    oldtrick_rhs: float = math.nan
    newton_converged: bool = True


@dataclass
class SweepReport:
    kind: str
    spec: SweepSpec
    rows: list[SweepRow]
    slope: float = math.nan
    slope_flag: str = ""
    slope_full: float = math.nan
    slope_full_flag: str = ""
    spread: float = math.nan
    spread_flag: str = ""
    threshold: float = math.nan
    ok: bool = True

    def summary(self) -> str:
        lines = [f"{self.kind} sweep on {self.spec.problem}: {len(self.rows)} rows"]
        if not math.isnan(self.slope) or self.slope_flag:
            lines.append(f"  slope={self.slope:.4g} {self.slope_flag}")
        if not math.isnan(self.spread) or self.spread_flag:
            lines.append(
                f"  spread(max/min)={self.spread:.4g} {self.spread_flag} "
                f"(threshold {self.threshold:g})"
            )
        lines.append("  RESULT: " + ("PASS" if self.ok else "FAIL"))
        return "\n".join(lines)


def fit_loglog_slope(eps: np.ndarray, values: np.ndarray, tail: int = 3):
    """Least-squares slope of log(values) against log(eps) on the last ``tail`` points.

    Non-positive values are dropped (exact zeros mean the quantity already sits
    on its floor); with fewer than two positive tail points the fit is
    vacuously conforming at any rate and (+inf, "zero-floor") is returned.
    """
    eps = np.asarray(eps, dtype=float)[-tail:]
    values = np.asarray(values, dtype=float)[-tail:]
    pos = values > 0.0
    if int(pos.sum()) < 2:
        return math.inf, "zero-floor"
    slope = np.polyfit(np.log(eps[pos]), np.log(values[pos]), 1)[0]
    return float(slope), ""


def positive_spread(values: np.ndarray):
    """max/min over the positive entries; (1.0, "all-zero") when none are positive."""
    values = np.asarray(values, dtype=float)
    pos = values[values > 0.0]
    if pos.size == 0:
        return 1.0, "all-zero"
    return float(pos.max() / pos.min()), ""


def _reference_trajectory(problem, grid) -> np.ndarray:
    return np.stack([sample_nodes(problem.reference, grid, t) for t in grid.times])


def _row_for_eps(spec: SweepSpec, eps: float, want_theta: bool) -> SweepRow:
    grid = spec.grid
    params = spec.params.with_eps(eps)
    problem = manufactured_problem(spec.problem, grid, params)
    small, mid, big = spec.cylinders
    p = params.p
    pp = params.p_prime

    f_raw = problem.source_values()
    f_eps = mollify_source(f_raw, grid, eps)
    row = SweepRow(eps=eps)
    row.mollification_error = lp_norm_cylinder(f_raw - f_eps, grid, big, pp)

    try:
        traj, _ = solve_cauchy_dirichlet(problem, spec.newton, source_values=f_eps)
    except NewtonError:
        row.newton_converged = False
        return row

    u_eps = traj.values
    u_ref = _reference_trajectory(problem, grid)
    du_eps = np.stack([discrete_gradient(u_eps[k], grid.h) for k in range(len(u_eps))])
    du_ref = np.stack([discrete_gradient(u_ref[k], grid.h) for k in range(len(u_ref))])

    du_ref_lp = lp_norm_cylinder(du_ref, grid, big, p, where="cells")
    sup_sq = sup_l2_in_time(u_eps - u_ref, grid, big) ** 2

    row.du_lp_p = lp_norm_cylinder(du_eps, grid, big, p, where="cells") ** p
    row.energy_lhs = row.du_lp_p + sup_sq
    row.energy_rhs = du_ref_lp**p + params.lam**p + 1.0

    v_eps = v_map_batch(du_eps, params)
    v_ref = v_map_batch(du_ref, params)
    row.v_l2_sq = (
        lp_norm_cylinder(v_eps - v_ref, grid, big, 2.0, where="cells") ** 2
    )
    row.comparison_lhs = sup_sq + row.v_l2_sq
    row.comparison_rhs = eps * (du_ref_lp**p + 1.0) + row.mollification_error * (
        du_ref_lp + params.lam + 1.0
    )

    h_half_diff = h_gamma_batch(du_eps, p / 2.0, params.lam) - h_gamma_batch(
        du_ref, p / 2.0, params.lam
    )
    row.oldtrick_rhs = (
        2.0**p * lp_norm_cylinder(h_half_diff, grid, big, 2.0, where="cells") ** 2
        + 2.0 ** (p + 1.0)
        * (du_ref_lp**p + params.lam**p * lp_norm_cylinder(
            np.ones_like(u_ref), grid, big, 1.0
        ))
    )

    row.sobolev_quantity = grad_l2_of_v(u_eps, grid, params, mid.shrunk(0.5))
    if p > 2.0:
        datum_term = parabolic_besov_norm(f_eps, grid, big, (p - 2.0) / p, pp) ** pp
    else:
        datum_term = lp_norm_cylinder(f_eps, grid, big, 2.0) ** 2 + 1.0
    row.sobolev_bound = (
        (du_ref_lp**p + du_ref_lp**2 + params.lam**p + params.lam**2 + 1.0)
        / mid.rho**2
        + datum_term
    )

    # backward time differences over Q_{r/2}
    dt_u = (u_eps[1:] - u_eps[:-1]) / grid.tau
    dt_traj = np.concatenate([np.zeros_like(dt_u[:1]), dt_u])
    tiny = small.shrunk(0.5)
    levels = tiny.level_mask(grid).copy()
    levels[0] = False
    mask = tiny.node_mask(grid)
    row.time_derivative_lp = float(
        (np.sum(np.abs(dt_traj[levels][:, mask]) ** pp) * grid.h**2 * grid.tau)
        ** (1.0 / pp)
    )
    if p > 2.0 and params.lam == 0.0:
        besov_f = parabolic_besov_norm(f_eps, grid, big, (p - 2.0) / p, pp)
        f_lp = lp_norm_cylinder(f_eps, grid, big, pp)
        row.time_derivative_rhs = (
            (du_ref_lp ** (p - 1.0) + du_ref_lp ** (p / 2.0) + du_ref_lp ** ((p - 2.0) / 2.0))
            / mid.rho
            + du_ref_lp ** ((p - 2.0) / 2.0) * besov_f ** (pp / 2.0)
            + f_lp
        )

    if want_theta:
        row.nikolskii_theta = nikolskii_fit(du_eps, grid, small, q=p)[0]
    return row


def compute_rows(
    spec: SweepSpec, want_theta: bool = False, threads: int = 1
) -> list[SweepRow]:
    """Solve one regularized problem per eps and collect every recorded quantity.

    Rows are deterministic functions of the spec (no randomness anywhere in the
    solve path) and are returned ordered by decreasing eps regardless of the
    execution schedule.  Theta is fitted only on the smallest eps when
    requested (it needs one solve's gradient field only).
    """
    flags = [
        want_theta and i == len(spec.eps_list) - 1 for i in range(len(spec.eps_list))
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda ef: _row_for_eps(spec, *ef),
                                 zip(spec.eps_list, flags)))
    else:
        rows = [_row_for_eps(spec, e, f) for e, f in zip(spec.eps_list, flags)]
    return rows


def _converged(rows):
    return [r for r in rows if r.newton_converged]


def run_energy_sweep(spec: SweepSpec, rows: list[SweepRow] | None = None) -> SweepReport:
    """Uniform energy estimate: the ratio energy_lhs / energy_rhs must have
    max/min spread <= 4 across the sweep."""
    rows = compute_rows(spec) if rows is None else rows
    good = _converged(rows)
    ratios = np.array([r.energy_lhs / r.energy_rhs for r in good])
    spread, flag = positive_spread(ratios)
    report = SweepReport("energy", spec, rows, spread=spread, spread_flag=flag,
                         threshold=4.0)
    report.ok = len(good) == len(rows) and spread <= 4.0
    return report


def run_comparison_sweep(
    spec: SweepSpec, rows: list[SweepRow] | None = None
) -> SweepReport:
    """Comparison estimate: log-log decay of the comparison quantity in eps.

    Fits both the full left side and the V-distance part on the eps-dominated
    tail (last three points); the reported slope is the V-part's, the
    acceptance floor is 0.8 for problems with f_eps = f.
    """
    rows = compute_rows(spec) if rows is None else rows
    good = _converged(rows)
    eps = np.array([r.eps for r in good])
    v_part = np.array([r.v_l2_sq for r in good])
    slope, flag = fit_loglog_slope(eps, v_part)
    full, full_flag = fit_loglog_slope(eps, np.array([r.comparison_lhs for r in good]))
    report = SweepReport(
        "comparison",
        spec,
        rows,
        slope=slope,
        slope_flag=flag,
        slope_full=full,
        slope_full_flag=full_flag,
    )
    report.ok = len(good) == len(rows) and slope >= 0.8
    return report


def run_sobolev_sweep(spec: SweepSpec, rows: list[SweepRow] | None = None) -> SweepReport:
    """Uniform Sobolev estimate: max/min spread of the V-gradient energy <= 10."""
    rows = compute_rows(spec) if rows is None else rows
    good = _converged(rows)
    quantities = np.array([r.sobolev_quantity for r in good])
    spread, flag = positive_spread(quantities)
    report = SweepReport("sobolev", spec, rows, spread=spread, spread_flag=flag,
                         threshold=10.0)
    report.ok = len(good) == len(rows) and spread <= 10.0
    return report


def run_time_derivative_check(
    spec: SweepSpec, rows: list[SweepRow] | None = None
) -> SweepReport:
    """Time-derivative estimate (p > 2, lambda = 0 only): bounded LHS/RHS spread."""
    if spec.params.p <= 2.0 or spec.params.lam != 0.0:
        raise ConfigError("time-derivative check requires p > 2 and lambda = 0")
    rows = compute_rows(spec) if rows is None else rows
    good = _converged(rows)
    ratios = np.array(
        [r.time_derivative_lp / r.time_derivative_rhs for r in good]
    )
    spread, flag = positive_spread(ratios)
    report = SweepReport("time-derivative", spec, rows, spread=spread,
                         spread_flag=flag, threshold=10.0)
    report.ok = len(good) == len(rows) and spread <= 10.0
    return report


def run_fractional_check(
    spec: SweepSpec, rows: list[SweepRow] | None = None
) -> SweepReport:
    """Fractional-smoothness floor (lambda = 0, p > 2): theta >= 2/p - 0.1 at the smallest eps."""
    if spec.params.p <= 2.0 or spec.params.lam != 0.0:
        raise ConfigError("fractional check requires p > 2 and lambda = 0")
    rows = compute_rows(spec, want_theta=True) if rows is None else rows
    good = _converged(rows)
    theta = next(
        (r.nikolskii_theta for r in reversed(good) if not math.isnan(r.nikolskii_theta)),
        math.nan,
    )
    floor = 2.0 / spec.params.p - 0.1
    report = SweepReport("fractional", spec, rows, slope=theta, threshold=floor)
    report.ok = len(good) == len(rows) and theta >= floor
    return report


def rows_to_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROW_FIELDS)
        for row in rows:
            writer.writerow(
                [
                    repr(getattr(row, name))
                    if not isinstance(getattr(row, name), bool)
                    else int(getattr(row, name))
                    for name in ROW_FIELDS
                ]
            )


def _json_num(x: float):
    """Strict-JSON-safe number: non-finite values map to None (flags carry the reason)."""
    return x if isinstance(x, float) and math.isfinite(x) else None


def write_manifest(report: SweepReport, path, extra: dict | None = None) -> None:
    """JSON manifest recording the resolved spec and the report's fits."""
    spec = report.spec
    payload = {
        "kind": report.kind,
        "problem": spec.problem,
        "grid": {
            "length": spec.grid.length,
            "cells": spec.grid.cells,
            "t_start": spec.grid.t_start,
            "t_end": spec.grid.t_end,
            "steps": spec.grid.steps,
        },
        "params": {
            "p": spec.params.p,
            "lambda": spec.params.lam,
            "alpha": spec.params.alpha,
        },
        "eps_list": list(spec.eps_list),
        "cylinders": [
            {"center": list(c.center), "t0": c.t0, "rho": c.rho}
            for c in spec.cylinders
        ],
        "slope": _json_num(report.slope),
        "slope_flag": report.slope_flag,
        "slope_full": _json_num(report.slope_full),
        "slope_full_flag": report.slope_full_flag,
        "spread": _json_num(report.spread),
        "spread_flag": report.spread_flag,
        "threshold": _json_num(report.threshold),
        "ok": report.ok,
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

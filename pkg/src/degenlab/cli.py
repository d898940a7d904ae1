"""Command line entry point: campaigns, solves, seminorm evaluation, sweeps.

Runs are driven by an INI-style config file and write all outputs (CSV tables
plus a JSON manifest with the resolved configuration) under the configured
output directory.  Outputs are byte-for-byte reproducible for identical
configs, except for the manifest's timestamp field.

Exit codes (also shown by --help):
    0  success
    2  usage error (bad flags or unknown subcommand)
    3  configuration validation failed
    4  solver nonconvergence
    5  quadrature failure
    6  invalid region or shift
    7  a verification failed (inequality violations or a sweep outside its
       acceptance band)
"""

from __future__ import annotations

import argparse
import configparser
import datetime
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
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
from .grid import SpaceTimeGrid, discrete_gradient
from .inequalities import SampleConfig, campaign_to_csv, format_summary, run_campaign
from .io import load_trajectory, save_trajectory
from .maps import DegenParams, default_alpha
from .problems import CATALOG_NAMES, manufactured_problem
from .seminorms import (
    Cylinder,
    SmoothnessOrder,
    besov_seminorm,
    default_cylinders,
    gagliardo_seminorm,
    grad_l2_of_v,
    lp_norm_cylinder,
    nikolskii_fit,
    parabolic_besov_norm,
    sup_l2_in_time,
)
from .solver import NewtonConfig, solve_cauchy_dirichlet
from .sweeps import (
    SweepSpec,
    compute_rows,
    rows_to_csv,
    run_comparison_sweep,
    run_energy_sweep,
    run_fractional_check,
    run_sobolev_sweep,
    run_time_derivative_check,
    write_manifest,
)

__all__ = ["RunConfig", "parse_config", "dispatch", "main"]

SWEEP_KINDS = ("energy", "comparison", "sobolev", "time-derivative", "fractional")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NONCONVERGENCE = 4
EXIT_QUADRATURE = 5
EXIT_REGION = 6
EXIT_VERIFICATION = 7


@dataclass
class RunConfig:
    """Validated run configuration assembled from the INI file."""

    params: DegenParams | None = None
    grid: SpaceTimeGrid | None = None
    problem: str | None = None
    newton: NewtonConfig = NewtonConfig()
    eps_list: tuple[float, ...] = ()
    cylinders: tuple[Cylinder, Cylinder, Cylinder] | None = None
    campaign: SampleConfig | None = None
    seminorm: dict | None = None
    out_dir: Path = Path("out")
    raw: dict | None = None


def _get(cp, failures, section, key, cast, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            failures.append(f"[{section}] missing key '{key}'")
        return default
    text = cp.get(section, key)
    try:
        return cast(text)
    except ValueError:
        failures.append(f"[{section}] {key} = {text!r} is not a valid {cast.__name__}")
        return default


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def parse_config(path) -> RunConfig:
    """Parse and validate the INI config; raises ConfigError listing every failure."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file {path} does not exist"])
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read(path)
    failures: list[str] = []
    cfg = RunConfig(raw={s: dict(cp.items(s)) for s in cp.sections()})

    if cp.has_section("params"):
        p = _get(cp, failures, "params", "p", float, required=True)
        lam = _get(cp, failures, "params", "lambda", float, 0.0)
        alpha = _get(cp, failures, "params", "alpha", float, None)
        eps = _get(cp, failures, "params", "eps", float, 0.0)
        if p is not None:
            if p < 2.0:
                failures.append(f"[params] p = {p} violates the constraint p >= 2")
            elif lam is not None and lam < 0.0:
                failures.append(f"[params] lambda = {lam} must be >= 0")
            else:
                floor = default_alpha(p, lam)
                if alpha is not None and lam > 0.0 and alpha < floor - 1e-12:
                    failures.append(
                        f"[params] alpha = {alpha} is below the admissible floor "
                        f"{floor} for p = {p}, lambda = {lam}"
                    )
                elif eps is not None and not 0.0 <= eps <= 1.0:
                    failures.append(f"[params] eps = {eps} must lie in [0, 1]")
                else:
                    try:
                        cfg.params = DegenParams(p, lam, alpha, eps)
                    except InvalidInputError as exc:
                        failures.append(f"[params] {exc}")

    if cp.has_section("grid"):
        length = _get(cp, failures, "grid", "length", float, 1.0)
        cells = _get(cp, failures, "grid", "cells", int, required=True)
        t_start = _get(cp, failures, "grid", "t_start", float, 0.0)
        t_end = _get(cp, failures, "grid", "t_end", float, required=True)
        steps = _get(cp, failures, "grid", "steps", int, required=True)
        if None not in (cells, t_end, steps):
            try:
                cfg.grid = SpaceTimeGrid(length, cells, t_start, t_end, steps)
            except InvalidInputError as exc:
                failures.append(f"[grid] {exc}")

    if cp.has_section("problem"):
        name = _get(cp, failures, "problem", "name", str, required=True)
        if name is not None and name not in CATALOG_NAMES:
            failures.append(
                f"[problem] unknown name {name!r} (catalog: {', '.join(CATALOG_NAMES)})"
            )
        cfg.problem = name

    if cp.has_section("newton"):
        cfg.newton = NewtonConfig(
            residual_tol=_get(cp, failures, "newton", "residual_tol", float, 1e-9),
            max_iters=_get(cp, failures, "newton", "max_iters", int, 40),
            linear_tol=_get(cp, failures, "newton", "linear_tol", float, 1e-10),
        )

    if cp.has_section("sweep"):
        eps_list = _get(cp, failures, "sweep", "eps_list", _float_list, required=True)
        if eps_list:
            if any(not 0.0 < e <= 1.0 for e in eps_list):
                failures.append("[sweep] all eps must lie in (0, 1]")
            if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
                failures.append("[sweep] eps_list must be strictly decreasing")
            cfg.eps_list = eps_list
        if cfg.grid is not None:
            radii = [
                _get(cp, failures, "sweep", key, float, frac * cfg.grid.length)
                for key, frac in (("r", 0.2), ("rho", 0.3), ("big_r", 0.4))
            ]
            center = (0.5 * cfg.grid.length, 0.5 * cfg.grid.length)
            if all(r is not None for r in radii):
                if not radii[0] < radii[1] < radii[2]:
                    failures.append("[sweep] cylinder radii must nest: r < rho < big_r")
                else:
                    cfg.cylinders = tuple(
                        Cylinder(center, cfg.grid.t_end, r) for r in radii
                    )

    if cp.has_section("campaign"):
        try:
            cfg.campaign = SampleConfig(
                num_samples=_get(cp, failures, "campaign", "num_samples", int, 10000),
                p_values=_get(
                    cp, failures, "campaign", "p_values", _float_list, (2.0, 2.5, 3.0, 4.0)
                ),
                lambda_values=_get(
                    cp,
                    failures,
                    "campaign",
                    "lambda_values",
                    _float_list,
                    (0.0, 0.5, 1.0, 2.0),
                ),
                magnitude_range=(
                    _get(cp, failures, "campaign", "mag_min", float, 1e-6),
                    _get(cp, failures, "campaign", "mag_max", float, 1e6),
                ),
                seed=_get(cp, failures, "campaign", "seed", int, 20240707),
            )
        except InvalidInputError as exc:
            failures.append(f"[campaign] {exc}")

    if cp.has_section("seminorm"):
        cfg.seminorm = {
            "estimator": _get(cp, failures, "seminorm", "estimator", str, required=True),
            "input": _get(cp, failures, "seminorm", "input", str, required=True),
            "s": _get(cp, failures, "seminorm", "s", float, 0.5),
            "p": _get(cp, failures, "seminorm", "p", float, 2.0),
            "q": _get(cp, failures, "seminorm", "q", float, 1.0),
            "radius": _get(cp, failures, "seminorm", "radius", float, None),
        }

    if cp.has_option("output", "dir"):
        cfg.out_dir = Path(cp.get("output", "dir"))

    if failures:
        raise ConfigError(failures)
    return cfg


def _write_run_manifest(out_dir: Path, name: str, cfg: RunConfig, extra: dict) -> None:
    payload = {
        "tool": "degenlab",
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": cfg.raw,
    }
    payload.update(extra)
    with open(out_dir / f"{name}.manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_check_inequalities(cfg: RunConfig, args) -> int:
    campaign = cfg.campaign or SampleConfig(num_samples=10000)
    if args.seed is not None:
        campaign = SampleConfig(
            campaign.num_samples,
            campaign.p_values,
            campaign.lambda_values,
            campaign.magnitude_range,
            args.seed,
        )
    report = run_campaign(campaign, threads=args.threads)
    out = cfg.out_dir
    campaign_to_csv(report, out / "campaign.csv")
    _write_run_manifest(
        out,
        "campaign",
        cfg,
        {
            "violations": report.total_violations,
            "samples": report.total_samples,
            "ok": report.ok,
        },
    )
    print(format_summary(report))
    return EXIT_OK if report.ok else EXIT_VERIFICATION


def _require(cfg: RunConfig, *what: str) -> None:
    missing = [w for w in what if getattr(cfg, w) in (None, (), "")]
    if missing:
        raise ConfigError([f"config is missing section(s) for: {', '.join(missing)}"])


def _cmd_solve(cfg: RunConfig, args) -> int:
    _require(cfg, "params", "grid", "problem")
    problem = manufactured_problem(cfg.problem, cfg.grid, cfg.params)
    traj, report = solve_cauchy_dirichlet(problem, cfg.newton)
    out = cfg.out_dir
    save_trajectory(traj, out / "trajectory.bin", cfg.params)
    report.to_csv(out / "solve_report.csv")
    _write_run_manifest(
        out,
        "solve",
        cfg,
        {
            "problem": cfg.problem,
            "max_newton_iters": max(report.newton_iters),
            "wall_time": report.wall_time,
        },
    )
    print(
        f"solved {cfg.problem}: {cfg.grid.steps} steps, "
        f"max {max(report.newton_iters)} Newton iters, {report.wall_time:.2f}s"
    )
    return EXIT_OK


def _cmd_seminorm(cfg: RunConfig, args) -> int:
    _require(cfg, "seminorm")
    opts = cfg.seminorm
    traj, params = load_trajectory(opts["input"])
    grid = traj.grid
    radius = opts["radius"] or 0.4 * grid.length
    cyl = Cylinder((0.5 * grid.length, 0.5 * grid.length), grid.t_end, radius)
    name = opts["estimator"]
    values = traj.values
    if name == "lp":
        value = lp_norm_cylinder(values, grid, cyl, opts["p"])
    elif name == "sup-l2":
        value = sup_l2_in_time(values, grid, cyl)
    elif name == "gagliardo":
        order = SmoothnessOrder(opts["s"], opts["p"], opts["q"])
        value = gagliardo_seminorm(values[-1], grid, order)
    elif name == "besov":
        order = SmoothnessOrder(opts["s"], opts["p"], opts["q"], radius / 4.0)
        value = besov_seminorm(values[-1], grid, order)
    elif name == "parabolic-besov":
        value = parabolic_besov_norm(values, grid, cyl, opts["s"], opts["p"])
    elif name == "nikolskii":
        value = nikolskii_fit(values, grid, cyl, opts["p"])[0]
    elif name == "grad-v":
        if params is None:
            raise ConfigError(["trajectory sidecar carries no params for grad-v"])
        value = grad_l2_of_v(values, grid, params, cyl)
    else:
        raise ConfigError([f"[seminorm] unknown estimator {name!r}"])
    out = cfg.out_dir
    with open(out / "seminorm.csv", "w", newline="") as fh:
        fh.write("estimator,region,value\n")
        fh.write(
            f"{name},ball({cyl.center[0]:g},{cyl.center[1]:g};{cyl.rho:g})x"
            f"({cyl.t0 - cyl.rho ** 2:g},{cyl.t0:g}],{value!r}\n"
        )
    _write_run_manifest(out, "seminorm", cfg, {"estimator": name, "value": value})
    print(f"{name} = {value!r}")
    return EXIT_OK


def _cmd_sweep(cfg: RunConfig, args) -> int:
    _require(cfg, "params", "grid", "problem", "eps_list")
    spec = SweepSpec(
        cfg.problem, cfg.grid, cfg.params, cfg.eps_list, cfg.cylinders, cfg.newton
    )
    rows = compute_rows(spec, want_theta=args.kind == "fractional", threads=args.threads)
    runner = {
        "energy": run_energy_sweep,
        "comparison": run_comparison_sweep,
        "sobolev": run_sobolev_sweep,
        "time-derivative": run_time_derivative_check,
        "fractional": run_fractional_check,
    }[args.kind]
    report = runner(spec, rows)
    out = cfg.out_dir
    stem = f"sweep_{args.kind}_{cfg.problem}"
    rows_to_csv(rows, out / f"{stem}.csv")
    write_manifest(
        report,
        out / f"{stem}.manifest.json",
        extra={
            "tool": "degenlab",
            "version": __version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        },
    )
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_VERIFICATION


def _cmd_report(cfg: RunConfig, args) -> int:
    out = cfg.out_dir
    manifests = sorted(out.glob("*.manifest.json"))
    if not manifests:
        print(f"no manifests under {out}")
        return EXIT_OK
    all_ok = True
    for path in manifests:
        with open(path) as fh:
            data = json.load(fh)
        ok = data.get("ok")
        status = "-" if ok is None else ("PASS" if ok else "FAIL")
        if ok is False:
            all_ok = False
        that = data.get("kind") or data.get("estimator") or data.get("problem") or ""
        extras = []
        for key in ("slope", "spread", "violations", "value"):
            if data.get(key) is not None:
                extras.append(f"{key}={data[key]}")
        print(f"{path.name:40s} {that:16s} {status:4s} {' '.join(extras)}")
    print("OVERALL: " + ("PASS" if all_ok else "FAIL"))
    return EXIT_OK if all_ok else EXIT_VERIFICATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degenlab",
        description="numerical laboratory for widely degenerate parabolic flows",
        epilog=__doc__.split("Exit codes")[1].join(["Exit codes", ""]),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", type=Path, help="INI config file")
    parser.add_argument("--out", type=Path, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("--seed", type=int, default=None, help="campaign seed override")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check-inequalities", help="run the inequality campaign")
    sub.add_parser("solve", help="solve the configured Cauchy-Dirichlet problem")
    sub.add_parser("seminorm", help="evaluate an estimator on a stored trajectory")
    sweep = sub.add_parser("sweep", help="run an eps-sweep")
    sweep.add_argument("kind", choices=SWEEP_KINDS)
    sub.add_parser("report", help="summarize manifests in the output directory")
    return parser


def dispatch(cfg: RunConfig, args) -> int:
    """Run the selected pipeline; returns the process exit status."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    handlers = {
        "check-inequalities": _cmd_check_inequalities,
        "solve": _cmd_solve,
        "seminorm": _cmd_seminorm,
        "sweep": _cmd_sweep,
        "report": _cmd_report,
    }
    return handlers[args.command](cfg, args)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            cfg = parse_config(args.config)
        else:
            cfg = RunConfig(raw={})
        if args.out is not None:
            cfg.out_dir = args.out
        return dispatch(cfg, args)
    except ConfigError as exc:
        print("configuration errors:", file=sys.stderr)
        for failure in exc.failures:
            print(f"  - {failure}", file=sys.stderr)
        return EXIT_CONFIG
    except NewtonError as exc:
        print(f"solver nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except QuadratureError as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except (RegionError, ShiftError, InsufficientDataError) as exc:
        print(f"invalid region or shift: {exc}", file=sys.stderr)
        return EXIT_REGION
    except (CatalogError, InvalidInputError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

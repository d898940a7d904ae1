import json
import math

import numpy as np
import pytest

from degenlab.errors import ConfigError, InvalidInputError
from degenlab.grid import SpaceTimeGrid
from degenlab.maps import DegenParams
from degenlab.sweeps import (
    ROW_FIELDS,
    SweepSpec,
    compute_rows,
    fit_loglog_slope,
    positive_spread,
    rows_to_csv,
    run_comparison_sweep,
    run_energy_sweep,
    run_fractional_check,
    run_sobolev_sweep,
    run_time_derivative_check,
    write_manifest,
)


def small_grid(n=12, steps=6):
    return SpaceTimeGrid(1.0, n, 0.0, 0.2, steps)


@pytest.fixture(scope="module")
def cone_rows():
    spec = SweepSpec("cone", small_grid(), DegenParams(3.0, 1.0), (1e-2, 1e-3))
    return spec, compute_rows(spec)


@pytest.fixture(scope="module")
def drift_rows():
    spec = SweepSpec("linear_drift", small_grid(), DegenParams(3.0, 1.0), (1e-1, 1e-2, 1e-3))
    return spec, compute_rows(spec)


class TestSpecValidation:
    def test_eps_monotone_required(self):
        with pytest.raises(InvalidInputError):
            SweepSpec("cone", small_grid(), DegenParams(3.0, 1.0), (1e-3, 1e-2))

    def test_eps_range(self):
        with pytest.raises(InvalidInputError):
            SweepSpec("cone", small_grid(), DegenParams(3.0, 1.0), (2.0, 1e-3))

    def test_default_cylinders_attached(self):
        spec = SweepSpec("cone", small_grid(), DegenParams(3.0, 1.0), (1e-2,))
        assert spec.cylinders[0].rho < spec.cylinders[2].rho


class TestFits:
    def test_slope_of_power_law(self):
        eps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
        vals = 3.0 * eps**1.7
        slope, flag = fit_loglog_slope(eps, vals)
        assert flag == ""
        assert slope == pytest.approx(1.7, rel=1e-10)

    def test_zero_floor_flagged(self):
        eps = np.array([1e-1, 1e-2, 1e-3])
        slope, flag = fit_loglog_slope(eps, np.zeros(3))
        assert math.isinf(slope) and flag == "zero-floor"

    def test_spread(self):
        spread, flag = positive_spread(np.array([2.0, 1.0, 4.0]))
        assert spread == 4.0 and flag == ""
        spread, flag = positive_spread(np.zeros(3))
        assert spread == 1.0 and flag == "all-zero"


class TestRows:
    def test_row_reproducibility(self, cone_rows):
        spec, rows = cone_rows
        again = compute_rows(SweepSpec(spec.problem, spec.grid, spec.params, (1e-2,)))
        for name in ROW_FIELDS:
            a, b = getattr(rows[0], name), getattr(again[0], name)
            if isinstance(a, float) and math.isnan(a):
                assert math.isnan(b)
            else:
                assert a == b

    def test_thread_invariance(self, cone_rows):
        spec, rows = cone_rows
        threaded = compute_rows(spec, threads=2)
        for r_seq, r_par in zip(rows, threaded):
            assert r_seq.energy_lhs == r_par.energy_lhs
            assert r_seq.v_l2_sq == r_par.v_l2_sq

    def test_empty_eps_list(self):
        spec = SweepSpec("cone", small_grid(), DegenParams(3.0, 1.0), ())
        assert compute_rows(spec) == []

    def test_all_quantities_nonnegative(self, cone_rows):
        _, rows = cone_rows
        for r in rows:
            assert r.energy_lhs >= 0 and r.comparison_lhs >= 0
            assert r.v_l2_sq >= 0 and r.sobolev_quantity >= 0
            assert r.mollification_error >= 0 and r.time_derivative_lp >= 0

    def test_oldtrick_integral_form(self, cone_rows):
        _, rows = cone_rows
        for r in rows:
            assert r.du_lp_p <= r.oldtrick_rhs * (1 + 1e-12)

    def test_mollification_monotone_for_smooth_source(self):
        spec = SweepSpec(
            "mms_smooth",
            SpaceTimeGrid(1.0, 16, 0.0, 0.2, 8),
            DegenParams(3.0, 0.0),
            (0.5, 0.25, 0.125),
        )
        rows = compute_rows(spec)
        errs = [r.mollification_error for r in rows]
        assert all(b <= a + 1e-10 for a, b in zip(errs, errs[1:]))


class TestRunners:
    def test_cone_reports(self, cone_rows):
        spec, rows = cone_rows
        comp = run_comparison_sweep(spec, rows)
        assert comp.slope_flag == "zero-floor" and comp.ok
        sob = run_sobolev_sweep(spec, rows)
        assert sob.spread_flag == "all-zero" and sob.ok
        en = run_energy_sweep(spec, rows)
        assert en.ok and en.spread <= 4.0

    def test_linear_drift_trivial(self, drift_rows):
        spec, rows = drift_rows
        for r in rows:
            assert r.comparison_lhs <= 1e-10
            assert r.sobolev_quantity <= 1e-10
        assert run_comparison_sweep(spec, rows).slope_flag == "zero-floor"

    def test_time_derivative_requires_regime(self):
        spec = SweepSpec("cone", small_grid(), DegenParams(3.0, 1.0), (1e-2,))
        with pytest.raises(ConfigError):
            run_time_derivative_check(spec, [])
        spec2 = SweepSpec("heat_sine", small_grid(), DegenParams(2.0, 0.0), (1e-2,))
        with pytest.raises(ConfigError):
            run_fractional_check(spec2, [])

    def test_heat_sine_sobolev_stable(self):
        # the V-gradient energy approximates the second-derivative energy of the
        # exact solution, stable across eps
        spec = SweepSpec(
            "heat_sine",
            SpaceTimeGrid(1.0, 16, 0.0, 0.2, 8),
            DegenParams(2.0, 0.0),
            (1e-2, 1e-3, 1e-4),
        )
        rows = compute_rows(spec)
        report = run_sobolev_sweep(spec, rows)
        assert report.ok
        vals = [r.sobolev_quantity for r in rows]
        assert max(vals) / min(vals) < 1.2


class TestOutputs:
    def test_csv_roundtrip(self, tmp_path, cone_rows):
        spec, rows = cone_rows
        path = tmp_path / "rows.csv"
        rows_to_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(ROW_FIELDS)
        assert len(lines) == len(rows) + 1
        first = lines[1].split(",")
        assert float(first[0]) == rows[0].eps

    def test_manifest(self, tmp_path, cone_rows):
        spec, rows = cone_rows
        report = run_comparison_sweep(spec, rows)
        path = tmp_path / "m.json"
        write_manifest(report, path)
        data = json.loads(path.read_text())
        assert data["kind"] == "comparison"
        assert data["problem"] == "cone"
        assert data["slope_flag"] == "zero-floor"
        assert data["ok"] is True

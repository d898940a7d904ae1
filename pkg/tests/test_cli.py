import json
import re
from pathlib import Path

import numpy as np
import pytest

from degenlab.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VERIFICATION,
    main,
    parse_config,
)
from degenlab.errors import ConfigError
from degenlab.grid import SpaceTimeGrid, Trajectory
from degenlab.io import load_trajectory, save_trajectory
from degenlab.maps import DegenParams

FULL_CONFIG = """
[params]
p = 3.0
lambda = 1.0
eps = 1e-2

[grid]
length = 1.0
cells = 12
t_start = 0.0
t_end = 0.2
steps = 6

[problem]
name = cone

[sweep]
eps_list = 1e-2, 1e-3

[campaign]
num_samples = 500
seed = 3

[output]
dir = {out}
"""


@pytest.fixture
def config_file(tmp_path):
    def _make(text=FULL_CONFIG, out=None):
        out = out or tmp_path / "out"
        path = tmp_path / "cfg.ini"
        path.write_text(text.format(out=out))
        return path, Path(out)

    return _make


class TestParseConfig:
    def test_minimal_valid_fills_defaults(self, config_file):
        path, _ = config_file()
        cfg = parse_config(path)
        assert cfg.params.alpha == 1.0  # resolved from the admissibility floor
        assert cfg.newton.max_iters == 40
        assert cfg.cylinders[2].rho == pytest.approx(0.4)

    def test_p_constraint_named(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[params]\np = 1.5\n")
        with pytest.raises(ConfigError) as err:
            parse_config(path)
        assert any("p >= 2" in f for f in err.value.failures)

    def test_alpha_floor_named(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[params]\np = 3.0\nlambda = 1.0\nalpha = 0.9\n")
        with pytest.raises(ConfigError) as err:
            parse_config(path)
        assert any("floor 1.0" in f for f in err.value.failures)

    def test_all_failures_collected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text(
            "[params]\np = 1.0\n"
            "[grid]\ncells = 2\nt_end = 1.0\nsteps = 0\n"
            "[problem]\nname = mystery\n"
            "[sweep]\neps_list = 1e-3, 1e-2\n"
        )
        with pytest.raises(ConfigError) as err:
            parse_config(path)
        text = "\n".join(err.value.failures)
        assert "p = 1.0" in text
        assert "unknown name" in text
        assert "decreasing" in text
        assert len(err.value.failures) >= 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "absent.ini")


class TestDispatch:
    def test_unknown_subcommand_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_solve_writes_outputs(self, config_file):
        path, out = config_file()
        assert main(["--config", str(path), "solve"]) == EXIT_OK
        assert (out / "trajectory.bin").exists()
        assert (out / "trajectory.bin.json").exists()
        assert (out / "solve_report.csv").exists()
        traj, params = load_trajectory(out / "trajectory.bin")
        assert traj.values.shape == (7, 13, 13)
        assert params.p == 3.0

    def test_sweep_and_report(self, config_file):
        path, out = config_file()
        assert main(["--config", str(path), "sweep", "comparison"]) == EXIT_OK
        csv_path = out / "sweep_comparison_cone.csv"
        assert csv_path.exists()
        manifest = json.loads((out / "sweep_comparison_cone.manifest.json").read_text())
        assert manifest["ok"] is True
        assert main(["--config", str(path), "report"]) == EXIT_OK

    def test_campaign_roundtrip(self, config_file):
        path, out = config_file()
        assert main(["--config", str(path), "check-inequalities"]) == EXIT_OK
        assert (out / "campaign.csv").exists()

    def test_seminorm_subcommand(self, config_file, tmp_path):
        path, out = config_file()
        assert main(["--config", str(path), "solve"]) == EXIT_OK
        cfg2 = tmp_path / "semi.ini"
        cfg2.write_text(
            f"[seminorm]\nestimator = lp\ninput = {out / 'trajectory.bin'}\n"
            f"p = 2.0\nradius = 0.3\n[output]\ndir = {out}\n"
        )
        assert main(["--config", str(cfg2), "seminorm"]) == EXIT_OK
        text = (out / "seminorm.csv").read_text()
        assert text.startswith("estimator,region,value")
        assert "lp" in text

    def test_config_error_exit_3(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[params]\np = 1.5\n")
        assert main(["--config", str(path), "solve"]) == EXIT_CONFIG

    def test_deterministic_outputs(self, config_file, tmp_path):
        path, out = config_file()
        main(["--config", str(path), "sweep", "comparison"])
        first = (out / "sweep_comparison_cone.csv").read_bytes()
        main(["--config", str(path), "sweep", "comparison"])
        second = (out / "sweep_comparison_cone.csv").read_bytes()
        assert first == second
        # manifests agree except for the timestamp line
        strip = lambda p: re.sub(rb'"timestamp": "[^"]*"', b"", p.read_bytes())
        m = out / "sweep_comparison_cone.manifest.json"
        first_m = strip(m)
        main(["--config", str(path), "sweep", "comparison"])
        assert strip(m) == first_m


class TestTrajectoryIO:
    def test_roundtrip(self, tmp_path):
        grid = SpaceTimeGrid(1.0, 8, 0.0, 0.1, 4)
        values = np.random.default_rng(0).standard_normal((5, 9, 9))
        traj = Trajectory(grid, values)
        params = DegenParams(2.5, 0.5, eps=0.1)
        save_trajectory(traj, tmp_path / "t.bin", params)
        back, loaded_params = load_trajectory(tmp_path / "t.bin")
        np.testing.assert_array_equal(back.values, values)
        assert back.grid == grid
        assert loaded_params == params

    def test_missing_sidecar(self, tmp_path):
        (tmp_path / "orphan.bin").write_bytes(b"\x00" * 8)
        from degenlab.errors import InvalidInputError

        with pytest.raises(InvalidInputError):
            load_trajectory(tmp_path / "orphan.bin")

"""Tests for the main CLI module."""

from pathlib import Path

import pytest
from typer.testing import CliRunner

from strataquad.config import settings
from strataquad.main import EXIT_BUDGET, EXIT_CONFIG, EXIT_DOMAIN, app

# Create a CLI runner for testing
runner = CliRunner()

DIVERGENT = """
name = "warped_divergent"

[model]
kind = "warped_fbm"
lambda = 0.1
beta = 1.5
amplitude = 5.0

[run]
N = [32, 64, 128, 256]
out = "{out}"

[analysis]
allow_singular = true
"""


@pytest.fixture
def divergent_config(tmp_path: Path) -> Path:
    """A singular model whose uniform-design constant diverges."""
    path = tmp_path / "divergent.cfg"
    path.write_text(DIVERGENT.format(out=(tmp_path / "out").as_posix()))
    return path


class TestMseCommand:
    """Tests for the mse subcommand."""

    def test_writes_schedule(self, ex4_config_file, tmp_path):
        """mse runs the schedule and writes schedule.csv."""
        result = runner.invoke(app, ["mse", str(ex4_config_file)])

        assert result.exit_code == 0, result.output
        lines = (tmp_path / "out" / "schedule.csv").read_text().splitlines()
        assert lines[0] == "N,e2,err_est,order,seconds"
        assert len(lines) == 6
        assert lines[1].startswith("8,")
        assert lines[1].endswith(",8,")

    def test_config_option(self, ex4_config_file, tmp_path):
        """The config may also be passed with --config and the output moved with --out."""
        out = tmp_path / "elsewhere"
        result = runner.invoke(app, ["mse", "--config", str(ex4_config_file), "--out", str(out)])

        assert result.exit_code == 0, result.output
        assert (out / "schedule.csv").exists()

    def test_per_stratum(self, ex4_config_file, tmp_path):
        """--per-stratum writes one file per entry."""
        result = runner.invoke(app, ["mse", str(ex4_config_file), "--per-stratum"])

        assert result.exit_code == 0, result.output
        lines = (tmp_path / "out" / "per_stratum_N8.csv").read_text().splitlines()
        assert lines[0] == "i1,volume,e2_i"
        assert len(lines) == 9

    def test_dry_run(self, ex4_config_file, tmp_path):
        """--dry-run prints projected costs without computing."""
        result = runner.invoke(app, ["mse", str(ex4_config_file), "--dry-run"])

        assert result.exit_code == 0, result.output
        assert "Total" in result.output
        assert not (tmp_path / "out" / "schedule.csv").exists()

    def test_budget_exit_code(self, ex4_config_file, monkeypatch):
        """A schedule entry over budget exits with the budget code."""
        monkeypatch.setattr(settings, "STRATAQUAD_BUDGET", 1000.0)

        result = runner.invoke(app, ["mse", str(ex4_config_file)])

        assert result.exit_code == EXIT_BUDGET
        assert "Projected kernel evaluations" in result.output


class TestConfigErrors:
    """Tests for the config exit code."""

    def test_missing_config_argument(self):
        """No config at all is a config error."""
        result = runner.invoke(app, ["mse"])

        assert result.exit_code == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        """A path that does not exist is a config error."""
        result = runner.invoke(app, ["asymptotics", str(tmp_path / "absent.cfg")])

        assert result.exit_code == EXIT_CONFIG

    def test_invalid_config(self, tmp_path, ex4_config_text):
        """Schema violations exit with the config code."""
        path = tmp_path / "bad.cfg"
        path.write_text(ex4_config_text.replace("N = [8, 16, 32, 64, 128]", "N = [8, 16]\nbogus = 1"))

        result = runner.invoke(app, ["mse", str(path)])

        assert result.exit_code == EXIT_CONFIG
        assert "bogus" in result.output

    def test_density_count_mismatch(self, tmp_path, ex4_config_text):
        """One density per component is required."""
        path = tmp_path / "bad.cfg"
        path.write_text(ex4_config_text.replace('["uniform"]', '["uniform", "uniform"]'))

        result = runner.invoke(app, ["mse", str(path)])

        assert result.exit_code == EXIT_CONFIG


class TestAnalysisCommands:
    """Tests for asymptotics, allocate, density-opt and diagnose-singularity."""

    def test_asymptotics(self, ex4_config_file, tmp_path):
        """asymptotics reports v and the optimal-density constant."""
        result = runner.invoke(app, ["asymptotics", str(ex4_config_file)])

        assert result.exit_code == 0, result.output
        text = (tmp_path / "out" / "asymptotics.csv").read_text()
        assert text.startswith("quantity,component,N_target,value")
        assert "v_opt,0," in text
        v_row = next(line for line in text.splitlines() if line.startswith("v,0,"))
        assert float(v_row.split(",")[-1]) == pytest.approx(3.030303, rel=1e-5)

    def test_divergent_constant_exit_code(self, divergent_config):
        """A diverging singular integral exits with the domain code."""
        result = runner.invoke(app, ["asymptotics", str(divergent_config)])

        assert result.exit_code == EXIT_DOMAIN

    def test_allocate(self, tmp_path, configs_dir):
        """allocate writes both rules for every requested N."""
        out = tmp_path / "alloc"
        result = runner.invoke(
            app,
            ["allocate", str(configs_dir / "ex3_uniform.cfg"), "--N", "1000", "--N", "8000", "--out", str(out)],
        )

        assert result.exit_code == 0, result.output
        lines = (out / "allocation.csv").read_text().splitlines()
        assert lines[0] == "N_target,rule,n,N_actual,predicted_e2"
        assert len(lines) == 5
        assert lines[1].startswith("1000,uniform,10x10,1000,")

    def test_density_opt(self, ex4_config_file, tmp_path):
        """density-opt writes the optimal density table."""
        result = runner.invoke(app, ["density-opt", str(ex4_config_file), "-j", "0"])

        assert result.exit_code == 0, result.output
        lines = (tmp_path / "out" / "density_0.csv").read_text().splitlines()
        assert lines[0] == "t,pdf,cdf,quantile"
        assert len(lines) == 101

    def test_diagnose_singularity(self, tmp_path, configs_dir):
        """Models with Hölder data get the growth diagnostics."""
        out = tmp_path / "diag"
        result = runner.invoke(app, ["diagnose-singularity", str(configs_dir / "ex5_alpha15.cfg"), "--out", str(out)])

        assert result.exit_code == 0, result.output
        assert "Threshold exponent" in result.output
        assert (out / "singularity.csv").read_text().startswith("s,ratio")

    def test_diagnose_needs_holder(self, ex4_config_file):
        """Models without Hölder data are rejected."""
        result = runner.invoke(app, ["diagnose-singularity", str(ex4_config_file)])

        assert result.exit_code == EXIT_CONFIG


class TestExperimentCommand:
    """Tests for the experiment subcommand."""

    def test_full_run(self, ex4_config_file, tmp_path):
        """experiment writes every artifact and prints the summary."""
        result = runner.invoke(app, ["experiment", str(ex4_config_file)])

        assert result.exit_code == 0, result.output
        out = tmp_path / "out"
        for name in ("schedule.csv", "fit.csv", "scaled.csv", "loglog.svg", "summary.txt"):
            assert (out / name).exists()
        assert "fitted rate" in result.output

    def test_dry_run(self, ex4_config_file, tmp_path):
        """--dry-run leaves the output directory empty."""
        result = runner.invoke(app, ["experiment", str(ex4_config_file), "--dry-run"])

        assert result.exit_code == 0, result.output
        assert not (tmp_path / "out" / "summary.txt").exists()


class TestHelp:
    """Top-level help output."""

    def test_lists_commands(self):
        """--help describes the tool and lists every command."""
        result = runner.invoke(app, ["--help"])

        assert result.exit_code == 0
        assert "stratified Monte Carlo quadrature" in result.stdout
        for command in ("mse", "asymptotics", "allocate", "density-opt", "experiment", "diagnose-singularity"):
            assert command in result.stdout

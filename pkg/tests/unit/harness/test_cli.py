from __future__ import annotations

import json
from pathlib import Path

import pytest

from action_persistence.harness import cli
from action_persistence.harness.cli import build_parser, main
from action_persistence.models.config import ExperimentConfig
from action_persistence.models.pfqi import PfqiConfig


class TestBuildParser:
    """Test cases for build_parser."""

    def test_experiment_command(self) -> None:
        """Test a subcommand with repeated overrides."""
        args = build_parser().parse_args(["train", "--set", "n_seeds=2", "--set", "n_jobs=4"])
        assert args.command == "train"
        assert args.overrides == ["n_seeds=2", "n_jobs=4"]
        assert args.config is None

    def test_verify_command(self) -> None:
        """Test suite selection."""
        args = build_parser().parse_args(["verify", "--suite", "bound", "--suite", "opcount", "--seed", "3"])
        assert args.suites == ["bound", "opcount"]
        assert args.seed == 3

    def test_rejects_unknown_suite(self) -> None:
        """Test that unknown suites are rejected by the parser."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["verify", "--suite", "speed"])

    def test_requires_command(self) -> None:
        """Test that a subcommand is required."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestMain:
    """Test cases for main."""

    def test_verify(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test a passing verification run and its report file."""
        output = tmp_path / "verify.json"
        code = main(["--log-level", "ERROR", "verify", "--suite", "counterexample", "--output", str(output)])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True
        assert json.loads(output.read_text())["suites"][0]["name"] == "counterexample"

    def test_collect(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test an experiment command and its summary line."""
        code = main(
            [
                "--log-level",
                "ERROR",
                "collect",
                "--set",
                "env.name=counterexample",
                "--set",
                "n_seeds=1",
                "--set",
                "collect.n_trajectories=3",
                "--set",
                f"output_dir={tmp_path}",
            ]
        )
        summary = json.loads(capsys.readouterr().out)
        assert code == 0
        assert summary["command"] == "collect"
        assert (tmp_path / "seed_0" / "dataset.csv").exists()

    def test_error_exit(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that package errors exit with code 1 and a JSON error."""
        code = main(["--log-level", "CRITICAL", "collect", "--config", str(tmp_path / "missing.json")])
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert code == 1
        assert error["error"] == "ConfigError"

    def test_unknown_environment(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that an unknown environment is reported."""
        code = main(["--log-level", "CRITICAL", "collect", "--set", "env.name=lunarlander"])
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert code == 1
        assert error["error"] == "EnvironmentConfigError"

    def test_validation_error_exit(self, capsys: pytest.CaptureFixture[str], monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that pydantic validation errors raised by a command exit with a JSON error."""

        def reject(config: ExperimentConfig) -> None:
            PfqiConfig(persistence=2, iterations=3)

        monkeypatch.setitem(cli.EXPERIMENT_COMMANDS, "train", reject)
        code = main(["--log-level", "CRITICAL", "train", "--set", "env.name=counterexample"])
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert code == 1
        assert error["error"] == "ValidationError"

    def test_malformed_curve_file(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that an empty curves.csv in a run directory exits with a JSON error."""
        (tmp_path / "evaluation.csv").write_text(
            "seed,k,k_prime,policy,episode,return,undiscounted_return\n0,1,1,greedy,0,1.0,1.0\n", encoding="utf-8"
        )
        run_dir = tmp_path / "seed_0" / "k_1"
        run_dir.mkdir(parents=True)
        (run_dir / "curves.csv").write_text("", encoding="utf-8")
        code = main(
            [
                "--log-level",
                "CRITICAL",
                "report",
                "--set",
                "env.name=counterexample",
                "--set",
                "n_seeds=1",
                "--set",
                "select.candidates=[1]",
                "--set",
                f"output_dir={tmp_path}",
            ]
        )
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert code == 1
        assert error["error"] == "EmptyDataError"

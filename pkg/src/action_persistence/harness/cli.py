"""Command-line interface of the action persistence toolkit."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import TYPE_CHECKING, Any

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from action_persistence.harness.commands import (
    cmd_collect,
    cmd_evaluate,
    cmd_explore,
    cmd_report,
    cmd_select,
    cmd_train,
)
from action_persistence.harness.config import load_config
from action_persistence.harness.io import write_json
from action_persistence.harness.verify import SUITES, run_verification
from action_persistence.utils.exceptions import ActionPersistenceError

if TYPE_CHECKING:
    from collections.abc import Callable

    from action_persistence.models.config import ExperimentConfig

# Printed as one JSON line on stderr with exit code 1.
REPORTED_ERRORS = (ActionPersistenceError, ValidationError, pd.errors.EmptyDataError, pd.errors.ParserError, OSError)

EXPERIMENT_COMMANDS: dict[str, Callable[[ExperimentConfig], Any]] = {
    "collect": cmd_collect,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "select": cmd_select,
    "report": cmd_report,
    "explore": cmd_explore,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per harness command."""
    parser = argparse.ArgumentParser(
        prog="action-persistence",
        description="Action persistence experiments: PFQI sweeps, evaluation, selection and exact checks",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"],
        help="Minimum level of the stderr log sink (default: INFO)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name in EXPERIMENT_COMMANDS:
        command = subparsers.add_parser(name, help=f"Run the {name} step of an experiment")
        command.add_argument("--config", type=Path, default=None, help="JSON config with flat dotted keys")
        command.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override a config key, e.g. --set select.candidates=[1,2,4] (repeatable)",
        )

    verify = subparsers.add_parser("verify", help="Run the exact verification suites")
    verify.add_argument(
        "--suite",
        dest="suites",
        action="append",
        choices=list(SUITES),
        default=None,
        help="Suite to run (repeatable; default: all)",
    )
    verify.add_argument("--seed", type=int, default=0, help="Seed of the random instances (default: 0)")
    verify.add_argument("--output", type=Path, default=None, help="Also write the report to this JSON file")
    return parser


def configure_logging(level: str) -> None:
    """Install a single stderr sink at ``level``."""
    logger.remove()
    logger.add(sys.stderr, level=level)


def _run_verify(args: argparse.Namespace) -> int:
    report = run_verification(args.suites, args.seed)
    if args.output is not None:
        write_json(args.output, report)
    print(report.model_dump_json(indent=2))
    return 0 if report.passed else 2


def main(argv: list[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        if args.command == "verify":
            return _run_verify(args)
        config = load_config(args.config, args.overrides)
        EXPERIMENT_COMMANDS[args.command](config)
        summary = {"command": args.command, "output_dir": config.output_dir, "config_hash": config.config_hash()}
        print(json.dumps(summary))
    except REPORTED_ERRORS as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

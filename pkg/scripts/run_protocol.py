from __future__ import annotations

import argparse
import sys
from pathlib import Path

from action_persistence.harness.cli import configure_logging
from action_persistence.harness.commands import cmd_collect, cmd_evaluate, cmd_report, cmd_select, cmd_train
from action_persistence.harness.config import load_config
from action_persistence.utils.exceptions import ActionPersistenceError


def main() -> None:
    """Run collect, train, evaluate, select and report for one environment."""
    parser = argparse.ArgumentParser(description="Run the full persistence protocol for one environment")
    parser.add_argument(
        "config",
        type=Path,
        nargs="?",
        default=Path("configs/cartpole.json"),
        help="Experiment config with flat dotted keys (default: configs/cartpole.json)",
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config key (repeatable)",
    )
    parser.add_argument("--log-level", default="WARNING", help="Log level (default: WARNING)")

    args = parser.parse_args()
    configure_logging(args.log_level)

    try:
        config = load_config(args.config, args.overrides)
    except ActionPersistenceError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        sys.exit(1)

    print("=" * 80)
    print("Action Persistence - Protocol Run")
    print("=" * 80)
    print(f"Environment: {config.env.name}")
    print(f"Candidate persistences: {config.select.candidates}")
    print(f"Iterations J: {config.pfqi.iterations}, seeds: {config.n_seeds}")
    print(f"Output directory: {config.output_dir}")
    print()

    cmd_collect(config)
    cmd_train(config)
    cmd_evaluate(config)
    summary = cmd_select(config)
    frames = cmd_report(config)

    print("=" * 80)
    print("Protocol completed!")
    print("=" * 80)
    print("Return of the greedy policy at its own persistence:")
    print(frames["table"].to_string(index=False))
    print()
    print(f"Chosen persistence per seed: {summary['chosen']}")
    print(f"Performance loss: {summary['performance_loss_mean']:.4f} +/- {summary['performance_loss_std']:.4f}")
    print()
    print("=" * 80)


if __name__ == "__main__":
    main()

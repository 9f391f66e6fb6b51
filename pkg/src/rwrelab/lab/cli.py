"""Command-line interface.

    rwlab <experiment> [--config cfg.yaml] [--model NAME|file.yaml]
          [--seed U64] [--threads N] [--out DIR] [--check] [--force] [...]

Each experiment writes CSV tables, a JSON summary, and rendered figures into
<out>/<experiment>/.  Exit status: 0 success, 1 configuration error,
2 hypothesis failure or (with --check) acceptance-threshold violation.
"""

from __future__ import annotations

import argparse
import sys

from ..env import ModelError
from ..stats import InsufficientDataError
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, config_from_dict, load_config
from .runners import CheckFailure, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwlab",
        description="Simulation laboratory for ballistic walks in random environments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--model", help="built-in model name or model YAML file")
        p.add_argument("--seed", type=int, dest="master_seed", help="master seed (64-bit)")
        p.add_argument("--threads", type=int, help="worker threads")
        p.add_argument("--out", dest="out_dir", help="output directory")
        p.add_argument("--check", action="store_true", default=None,
                       help="fail (exit 2) when acceptance thresholds are violated")
        p.add_argument("--force", action="store_true", default=None,
                       help="run even if the model fails the hypothesis checks")
        p.add_argument("--replicas", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--walks", type=int)
        p.add_argument("--n-steps", type=int, dest="n_steps")
        p.add_argument("--confirm", type=int, dest="confirm_horizon")
        p.add_argument("--variant", choices=["common-env", "independent-env", "coupled"])
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("config", "experiment") and v is not None
    }
    if args.config:
        return load_config(args.config, experiment=args.experiment, **overrides)
    return config_from_dict({"experiment": args.experiment, **overrides}, where="args")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, ModelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        summary, failures = run_experiment(cfg)
    except (ConfigError, ModelError, InsufficientDataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except CheckFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"{cfg.experiment}: wrote {cfg.out_dir}/{cfg.experiment}/summary.json")
    for line in failures:
        print(f"check: {line}")
    if failures and cfg.check:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

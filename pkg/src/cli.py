# src/cli.py
"""Command line entry point: python -m src.cli {run,presets,validate}"""
import argparse
import json
import sys
from typing import List, Optional

from src.config_files import load_experiment_config
from src.errors import SimulationError
from src.experiment import apply_overrides, run_experiment, validate_experiment
from src.logger_config import logger
from src.presets import get_preset, list_presets

EXIT_OK = 0
EXIT_SIMULATION_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmvno-sim", description="C-MVNO profit-maximization simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run an experiment and write CSV results")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="experiment file (.toml or .json)")
    source.add_argument("--preset", help="name of an embedded experiment")
    run.add_argument("--V", dest="v_values", type=float, nargs="+", help="tradeoff parameters V")
    run.add_argument("--horizon", type=int, help="slots per replication")
    run.add_argument("--reps", dest="replications", type=int, help="replications per V")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", dest="output_dir", help="results directory")
    run.add_argument("--per-slot", dest="per_slot", action="store_true", default=None,
                     help="also write one per-slot CSV per replication")

    commands.add_parser("presets", help="list embedded experiments")

    validate = commands.add_parser("validate", help="check an experiment file")
    validate.add_argument("--config", required=True)
    return parser


def _run(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config) if args.config else get_preset(args.preset)
    config = apply_overrides(
        config,
        v_values=args.v_values,
        horizon=args.horizon,
        replications=args.replications,
        seed=args.seed,
        per_slot=args.per_slot,
    )
    report = run_experiment(config, output_dir=args.output_dir, write_csv=True)
    for path in report.files:
        print(path)
    return EXIT_OK


def _presets() -> int:
    for preset in list_presets():
        print(f"{preset.name}\t{preset.description}")
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    report = validate_experiment(load_experiment_config(args.config))
    print(json.dumps(report.model_dump(), indent=2))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "presets":
            return _presets()
        return _validate(args)
    except SimulationError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SIMULATION_ERROR


if __name__ == "__main__":
    sys.exit(main())

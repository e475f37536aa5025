#!/usr/bin/env python3
"""
Analytic CIL - Command Line
Entry point of the ``acil`` command.

    acil run -c config.yaml [--repeat n] [--seeds s1,s2,...]
    acil verify -c config.yaml [--tol 1e-8]
    acil sweep -c config.yaml --axis gamma --values 0.1,0.01,0.001
    acil report report.json [other.json] [--csv out.csv]

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 verification failure.
"""
from typing import List, Optional
import argparse
import logging
import sys

from src.core.errors import AcilError, ValidationError
from src.experiment.reports import cmd_report
from src.experiment.runner import SWEEP_AXES, cmd_run, cmd_run_repeated, cmd_sweep, cmd_verify
from src.utils.config import load_config
from src.utils.helpers import configure_logging, parse_float_list, parse_int_list

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acil", description="Analytic class-incremental learning experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="base training plus K incremental phases")
    run.add_argument("-c", "--config", required=True, help="experiment YAML file")
    run.add_argument("--repeat", type=int, default=None, help="number of seeded repeats")
    run.add_argument("--seeds", default=None, help="comma-separated seeds for the repeats")

    verify = commands.add_parser("verify", help="compare the recursive learner with the joint solution")
    verify.add_argument("-c", "--config", required=True, help="experiment YAML file")
    verify.add_argument("--tol", type=float, default=None, help="max-abs weight tolerance")

    sweep = commands.add_parser("sweep", help="one run per value of an axis")
    sweep.add_argument("-c", "--config", required=True, help="experiment YAML file")
    sweep.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    sweep.add_argument("--values", required=True, help="comma-separated axis values")

    report = commands.add_parser("report", help="summarize one report or diff two")
    report.add_argument("paths", nargs="+", help="report.json path(s)")
    report.add_argument("--csv", default=None, help="CSV output path")
    return parser


def _repeat_seeds(repeat: Optional[int], seeds: Optional[str], first_seed: int) -> Optional[List[int]]:
    if repeat is None and seeds is None:
        return None
    chosen = parse_int_list(seeds) if seeds is not None else None
    if repeat is not None and repeat < 1:
        raise ValidationError("--repeat must be >= 1")
    if chosen is None:
        assert repeat is not None
        return [first_seed + i for i in range(repeat)]
    if repeat is not None and repeat != len(chosen):
        raise ValidationError(f"--repeat {repeat} does not match {len(chosen)} seeds")
    return chosen


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return the process exit status."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        if args.command == "run":
            config = load_config(args.config)
            seeds = _repeat_seeds(args.repeat, args.seeds, config.split_seed)
            if seeds is None:
                cmd_run(config)
            else:
                cmd_run_repeated(config, seeds)
        elif args.command == "verify":
            cmd_verify(load_config(args.config), args.tol)
        elif args.command == "sweep":
            cmd_sweep(load_config(args.config), args.axis, parse_float_list(args.values))
        elif args.command == "report":
            cmd_report(args.paths, args.csv)
    except AcilError as e:
        logger.error("%s", e)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

One experiment per invocation: `nelson-mf <experiment> --config <path>`.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 budget exceeded. NELSON_MF_OUT and NELSON_MF_THREADS override the
output directory and worker count when the flags are absent.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .config import EXPERIMENTS, load_config
from .errors import BudgetError, ConfigError, NumericalError
from .experiments import run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BUDGET = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nelson-mf",
        description=(
            "Simulation and verification suite for mean-field fermion "
            "dynamics coupled to a quantized scalar field."
        ),
    )
    parser.add_argument("--version", action="store_true", help="print version and exit")
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log solver progress"
    )
    subparsers = parser.add_subparsers(dest="experiment")
    for name in EXPERIMENTS:
        sub = subparsers.add_parser(name, help=f"run the {name} experiment")
        sub.add_argument("--config", required=True, help="experiment config file")
        sub.add_argument("--out", default=None, help="output directory override")
        sub.add_argument(
            "--seed", type=int, default=None, help="seed override (unsigned 64-bit)"
        )
        sub.add_argument(
            "--threads", type=int, default=None, help="worker thread count"
        )
    return parser


def _resolve_threads(flag_value) -> int:
    if flag_value is not None:
        return max(1, int(flag_value))
    env = os.environ.get("NELSON_MF_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"NELSON_MF_THREADS is not an integer: {env!r}") from exc
    return 1


def _resolve_output(flag_value, config):
    if flag_value is not None:
        return flag_value
    env = os.environ.get("NELSON_MF_OUT")
    if env is not None:
        return os.path.join(env, config.experiment)
    return None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        from . import __version__

        print(__version__)
        return EXIT_OK
    if args.experiment is None:
        parser.print_help()
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)
        if config.experiment != args.experiment:
            raise ConfigError(
                f"config names experiment {config.experiment!r} but the "
                f"command line asked for {args.experiment!r}"
            )
        out_dir = _resolve_output(args.out, config)
        if out_dir is not None:
            config = replace(config, output_dir=out_dir)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        threads = _resolve_threads(args.threads)
        result = run_experiment(config, threads=threads)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name in result.files:
        print(os.path.join(result.out_dir, name))
    print(result.manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

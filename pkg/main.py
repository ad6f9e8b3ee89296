#!/usr/bin/env python3
"""
AC primal-dual - auto-conditioned primal-dual solvers with certificates

Entry point for the command-line runner.
"""

import argparse
import json
import logging
import sys

import yaml

from src.cli.runner import compare, run
from src.utils.config import load_config
from src.utils.errors import ConfigError, DivergenceError, SolverError
from src.utils.logger import setup_logging

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Run auto-conditioned primal-dual solvers on benchmark problems."
    )
    parser.add_argument("--defaults", default="config/default.yaml", help="application YAML")
    parser.add_argument("--out", default=None, help="output directory (overrides all others)")
    parser.add_argument("--seed", type=int, default=None, help="problem seed override")
    parser.add_argument("--max-iters", type=int, default=None, help="iteration budget override")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", help="solve one problem with one algorithm").add_argument("config")
    sub.add_parser("compare", help="solve one problem with several algorithms").add_argument(
        "config"
    )
    return parser.parse_args(argv)


def main(argv=None) -> int:
    """Main application entry point."""
    args = parse_args(argv)
    logger = logging.getLogger("acpd.main")
    try:
        # Load configuration
        config = load_config(args.defaults)

        # Setup logging
        setup_logging(config)
        logger.info(f"Starting {args.command} with {args.config}")

        command = run if args.command == "run" else compare
        command(
            args.config,
            defaults_path=args.defaults,
            out=args.out,
            seed=args.seed,
            max_iters=args.max_iters,
        )

    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return EXIT_SOLVER
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, yaml.YAMLError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except SolverError as e:
        logger.error(f"Solver error: {e}", exc_info=True)
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

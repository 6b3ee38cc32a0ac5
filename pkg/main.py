# main.py

import argparse
import sys
from typing import List, Optional

from config import config
from errors import InputNotFoundError, LeakageError, PipelineError
from handlers import (
    register_validate,
    register_reduce,
    register_cluster,
    register_entropy,
    register_simulate,
    register_evaluate,
    register_plot_data,
    register_pipeline,
)
from services.logger import logger, setup_logger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_LEAKAGE = 3


def setup_commands() -> argparse.ArgumentParser:
    """
    Build the argument parser and register every subcommand on it.
    """
    parser = argparse.ArgumentParser(
        prog="wsi-entropy",
        description="Pick target WSIs to annotate by the entropy of their patch-cluster histogram.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="<command>")

    register_validate(subparsers)
    register_reduce(subparsers)
    register_cluster(subparsers)
    register_entropy(subparsers)
    register_simulate(subparsers)
    register_evaluate(subparsers)
    register_plot_data(subparsers)
    register_pipeline(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point for the command-line interface.

    Returns the process exit code: 0 on success, 1 on a pipeline error,
    2 on a missing input or a usage error, 3 on train/test leakage.
    """
    parser = setup_commands()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    try:
        setup_logger(args.log_level.upper())
    except ValueError:
        logger.error("cli: unknown log level %r", args.log_level)
        return EXIT_USAGE

    try:
        config.validate()
        return args.handler(args)
    except InputNotFoundError as exc:
        logger.error("%s: %s", exc.stage, exc)
        return EXIT_USAGE
    except LeakageError as exc:
        logger.error("%s: %s", exc.stage, exc)
        return EXIT_LEAKAGE
    except PipelineError as exc:
        logger.error("%s: %s", exc.stage, exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

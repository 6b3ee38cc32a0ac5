# handlers/validate.py
"""`validate`: load a feature table and report its shape and class balance."""

import argparse

from dataset import class_histogram
from errors import EmptyLabelError
from handlers.common import add_common_args, add_table_args, read_table
from services.logger import logger


def run_validate(args: argparse.Namespace) -> int:
    table = read_table(args.input, args, domain=args.domain)
    sizes = table.group_sizes()
    logger.info(
        "%s table OK: N=%d, D=%d, C=%d, %d groups (sizes %d..%d)",
        table.domain,
        len(table),
        table.dim,
        table.num_classes,
        len(sizes),
        min(sizes.values(), default=0),
        max(sizes.values(), default=0),
    )
    try:
        counts = class_histogram(table).counts
        logger.info("class counts: %s", counts.tolist())
    except EmptyLabelError:
        logger.info("table is unlabeled")
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("validate", help="check a feature table")
    add_table_args(parser)
    parser.add_argument("--domain", choices=("source", "target"), default=None)
    add_common_args(parser)
    parser.set_defaults(handler=run_validate)

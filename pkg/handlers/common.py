# handlers/common.py
"""
Helpers shared by the subcommand handlers: common flags, input checks and
knob resolution against the environment config.
"""

import argparse
from pathlib import Path
from typing import Optional

from config import config
from dataset import FeatureTable, load_table
from errors import InputNotFoundError
from services.classifier import TrainConfig
from services.logger import logger


def add_common_args(parser: argparse.ArgumentParser, seed_default: Optional[int] = config.SEED) -> None:
    """Global flags, accepted by every subcommand."""
    parser.add_argument("--seed", type=int, default=seed_default, help="64-bit base seed")
    parser.add_argument("--jobs", type=int, default=config.JOBS, help="worker threads (1 = sequential)")
    parser.add_argument("--out", default=config.OUT_DIR, help="output directory")
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="DEBUG, INFO, WARNING, ...")


def add_table_args(parser: argparse.ArgumentParser, flag: str = "--input", required: bool = True) -> None:
    parser.add_argument(flag, required=required, help="feature table (CSV or binary manifest .json)")
    parser.add_argument("--format", choices=("csv", "binary"), default=None, help="input format")
    parser.add_argument("--classes", type=int, default=None, help="override the declared class count")


def on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return value == "on"


def require_file(path: Optional[str]) -> Path:
    if path is None or not Path(path).is_file():
        raise InputNotFoundError(str(path))
    return Path(path)


def read_table(path: str, args: argparse.Namespace, domain: Optional[str] = None) -> FeatureTable:
    require_file(path)
    table = load_table(path, fmt=getattr(args, "format", None), num_classes=getattr(args, "classes", None), domain=domain)
    logger.info(
        "loaded %s: %d records, %d groups, D=%d, C=%d",
        path,
        len(table),
        len(table.group_index),
        table.dim,
        table.num_classes,
    )
    return table


def out_dir(args: argparse.Namespace) -> Path:
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def table_suffix(fmt: Optional[str]) -> str:
    return ".json" if fmt == "binary" else ".csv"


def resolve_dim(requested: Optional[int], table_dim: int) -> int:
    """
    The PCA dimension to use.

    An explicit --dim is passed through unchanged (fit_pca rejects d > D);
    the configured default is capped at the table dimension.
    """
    if requested is not None:
        return requested
    if config.DIM > table_dim:
        logger.warning("default --dim %d exceeds table dimension %d; using %d", config.DIM, table_dim, table_dim)
        return table_dim
    return config.DIM


def train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch,
        optimizer=args.optimizer,
        weight_decay=args.weight_decay,
        early_stop=args.early_stop,
        patience=args.patience,
    )

# handlers/reduce.py
"""`reduce`: fit PCA (on target, or source + target) and project the tables."""

import argparse
from pathlib import Path
from typing import Optional, Tuple

from config import config
from dataset import FeatureTable, write_table
from handlers.common import add_common_args, add_table_args, out_dir, read_table, resolve_dim, table_suffix
from services.artifacts import write_json
from services.pca import PcaModel, fit_pca, fit_pca_joint, transform

PCA_FILE = "pca.json"


def reduce_stage(
    target: FeatureTable,
    source: Optional[FeatureTable],
    dim: Optional[int],
    pca_fit: str,
    out: Path,
    fmt: Optional[str] = None,
) -> Tuple[PcaModel, FeatureTable, Optional[FeatureTable]]:
    d = resolve_dim(dim, target.dim)
    if pca_fit == "both" and source is not None:
        model = fit_pca_joint([source, target], d)
    else:
        model = fit_pca(target, d)
    write_json(model.to_dict(), out / PCA_FILE)

    reduced_target = transform(model, target)
    write_table(reduced_target, out / f"reduced_target{table_suffix(fmt)}", fmt)
    reduced_source = None
    if source is not None:
        reduced_source = transform(model, source)
        write_table(reduced_source, out / f"reduced_source{table_suffix(fmt)}", fmt)
    return model, reduced_target, reduced_source


def run_reduce(args: argparse.Namespace) -> int:
    target = read_table(args.input, args)
    source = read_table(args.source, args, domain="source") if args.source else None
    reduce_stage(target, source, args.dim, args.pca_fit, out_dir(args), args.format)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("reduce", help="PCA-reduce feature tables")
    add_table_args(parser)
    parser.add_argument("--source", default=None, help="source table, projected with the same model")
    parser.add_argument("--dim", type=int, default=None, help=f"target dimension (default {config.DIM})")
    parser.add_argument("--pca-fit", choices=("target", "both"), default=config.PCA_FIT)
    add_common_args(parser)
    parser.set_defaults(handler=run_reduce)

# handlers/pipeline.py
"""
`pipeline`: load -> reduce -> cluster -> entropy -> rank -> select in one go.

Each stage is the same function the standalone subcommand calls, so running
the subcommands by hand with the same knobs gives the same artifacts. The
run manifest records every knob and seed; `--manifest` replays it.
"""

import argparse

from config import config
from errors import ConfigError, InputNotFoundError
from handlers.cluster import ASSIGNMENT_FILE, KMEANS_FILE, add_kmeans_args, cluster_stage
from handlers.common import add_common_args, add_table_args, out_dir, read_table, resolve_dim, table_suffix
from handlers.entropy import ENTROPY_FILE, RANKING_FILE, SELECTION_FILE, entropy_stage, rank_stage, select_stage
from handlers.reduce import PCA_FILE, reduce_stage
from services.artifacts import read_json, write_json
from services.logger import logger

MANIFEST_FILE = "manifest.json"

# Knobs replayed from a manifest, keyed by their argparse dest.
_KNOBS = ("k", "dim", "seed", "restarts", "tol", "max_iter", "n", "pca_fit")
_INPUTS = ("input", "source", "format", "classes")


def _apply_manifest(args: argparse.Namespace) -> None:
    manifest = read_json(args.manifest)
    if manifest.get("command") != "pipeline":
        raise ConfigError(f"{args.manifest} is not a pipeline manifest")
    for name in _INPUTS:
        setattr(args, name, manifest["inputs"].get(name))
    for name in _KNOBS:
        setattr(args, name, manifest["knobs"][name])


def run_pipeline(args: argparse.Namespace) -> int:
    if args.manifest:
        _apply_manifest(args)
        logger.info("replaying %s", args.manifest)
    if args.input is None:
        raise InputNotFoundError("--input")

    out = out_dir(args)
    target = read_table(args.input, args)
    source = read_table(args.source, args, domain="source") if args.source else None
    dim = resolve_dim(args.dim, target.dim)

    _, reduced, _ = reduce_stage(target, source, dim, args.pca_fit, out, args.format)
    model, assignment = cluster_stage(
        reduced, args.k, args.seed, args.restarts, args.tol, args.max_iter, args.jobs, out
    )
    entropies = entropy_stage(reduced, assignment, args.k, out)
    ranking = rank_stage(entropies, args.n, out)
    group_id = select_stage(ranking, out)
    logger.info("selected %s for annotation (H=%.6f)", group_id, ranking.ordered[0].entropy)

    suffix = table_suffix(args.format)
    outputs = [PCA_FILE, f"reduced_target{suffix}"]
    if source is not None:
        outputs.append(f"reduced_source{suffix}")
    outputs += [KMEANS_FILE, ASSIGNMENT_FILE, ENTROPY_FILE, RANKING_FILE, SELECTION_FILE]

    knobs = {name: getattr(args, name) for name in _KNOBS}
    knobs["dim"] = dim
    write_json(
        {
            "command": "pipeline",
            "inputs": {name: getattr(args, name) for name in _INPUTS},
            "knobs": knobs,
            "seeds": {"base": args.seed, "restarts": [(args.seed + r) % 2**64 for r in range(args.restarts)], "winner": model.seed},
            "outputs": outputs,
        },
        out / MANIFEST_FILE,
    )
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("pipeline", help="run every selection stage and write a manifest")
    add_table_args(parser, required=False)
    parser.add_argument("--source", default=None, help="source table, projected with the same PCA")
    parser.add_argument("--dim", type=int, default=None, help=f"PCA dimension (default {config.DIM})")
    parser.add_argument("--pca-fit", choices=("target", "both"), default=config.PCA_FIT)
    add_kmeans_args(parser)
    parser.add_argument("--n", type=int, default=config.SLICE_SIZE, help="High/Med/Low slice size")
    parser.add_argument("--manifest", default=None, help="replay the knobs of a previous manifest.json")
    add_common_args(parser)
    parser.set_defaults(handler=run_pipeline)

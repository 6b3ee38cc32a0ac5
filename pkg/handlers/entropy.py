# handlers/entropy.py
"""
`entropy`, `rank` and `select`: cluster entropy per WSI, the entropy
ranking with its High/Med/Low slices, and the WSI chosen for annotation.
"""

import argparse
from pathlib import Path
from typing import List

from config import config
from dataset import FeatureTable
from handlers.common import add_common_args, add_table_args, out_dir, read_table, require_file
from services.artifacts import (
    entropy_rows,
    ranking_rows,
    read_assignment,
    read_entropies,
    read_ranking,
    write_json,
    write_ndjson,
)
from services.cluster import Assignment
from services.entropy import (
    GroupEntropy,
    RankedSelection,
    compute_entropies,
    entropy_table,
    group_histograms,
    rank_groups,
    select_wsi,
)
from services.logger import logger

ENTROPY_FILE = "entropy.ndjson"
RANKING_FILE = "ranking.ndjson"
SELECTION_FILE = "selection.json"


def entropy_stage(reduced: FeatureTable, assignment: Assignment, K: int, out: Path) -> List[GroupEntropy]:
    entropies = compute_entropies(group_histograms(assignment, reduced, K))
    write_ndjson(entropy_rows(entropies), out / ENTROPY_FILE)
    return entropies


def rank_stage(entropies: List[GroupEntropy], n: int, out: Path) -> RankedSelection:
    ranking = rank_groups(entropies, n)
    write_ndjson(ranking_rows(ranking), out / RANKING_FILE)
    table = entropy_table(ranking.ordered)[["group_id", "n", "entropy"]].copy()
    table.insert(1, "slice", [ranking.slice_of(g) for g in table["group_id"]])
    shown = table.head(2 * n)
    logger.info("entropy ranking (top %d):\n%s", len(shown), shown.round(4).to_string(index=False))
    return ranking


def select_stage(ranking: RankedSelection, out: Path) -> str:
    group_id = select_wsi(ranking)
    top = ranking.ordered[0]
    write_json(
        {"group_id": group_id, "entropy": top.entropy, "n_patches": top.n_patches, "K": top.K},
        out / SELECTION_FILE,
    )
    return group_id


def run_entropy(args: argparse.Namespace) -> int:
    reduced = read_table(args.input, args)
    assignment = read_assignment(require_file(args.assignment), reduced)
    entropy_stage(reduced, assignment, args.k, out_dir(args))
    return 0


def run_rank(args: argparse.Namespace) -> int:
    entropies = read_entropies(require_file(args.entropy))
    rank_stage(entropies, args.n, out_dir(args))
    return 0


def run_select(args: argparse.Namespace) -> int:
    ranking = read_ranking(require_file(args.ranking))
    select_stage(ranking, out_dir(args))
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("entropy", help="cluster entropy per WSI (NDJSON)")
    add_table_args(parser)
    parser.add_argument("--assignment", required=True, help="assignment.csv from `cluster`")
    parser.add_argument("--k", type=int, default=config.K, help="number of clusters")
    add_common_args(parser)
    parser.set_defaults(handler=run_entropy)

    parser = subparsers.add_parser("rank", help="sort WSIs by entropy and cut High/Med/Low")
    parser.add_argument("--entropy", required=True, help="entropy.ndjson from `entropy`")
    parser.add_argument("--n", type=int, default=config.SLICE_SIZE, help="slice size")
    add_common_args(parser)
    parser.set_defaults(handler=run_rank)

    parser = subparsers.add_parser("select", help="pick the highest-entropy WSI")
    parser.add_argument("--ranking", required=True, help="ranking.ndjson from `rank`")
    add_common_args(parser)
    parser.set_defaults(handler=run_select)

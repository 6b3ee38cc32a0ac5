# handlers/cluster.py
"""`cluster`: k-means++ clustering of the reduced target table."""

import argparse
from pathlib import Path
from typing import Tuple

from config import config
from dataset import FeatureTable
from handlers.common import add_common_args, add_table_args, out_dir, read_table
from services.artifacts import write_assignment, write_json
from services.cluster import Assignment, KMeansModel, fit_kmeans

KMEANS_FILE = "kmeans.json"
ASSIGNMENT_FILE = "assignment.csv"


def cluster_stage(
    reduced: FeatureTable,
    K: int,
    seed: int,
    restarts: int,
    tol: float,
    max_iter: int,
    jobs: int,
    out: Path,
) -> Tuple[KMeansModel, Assignment]:
    model, assignment = fit_kmeans(
        reduced, K, seed=seed, restarts=restarts, tol=tol, max_iter=max_iter, jobs=jobs
    )
    payload = model.to_dict()
    payload.update(restarts=restarts, tol=tol, max_iter=max_iter)
    write_json(payload, out / KMEANS_FILE)
    write_assignment(assignment, reduced, out / ASSIGNMENT_FILE)
    return model, assignment


def add_kmeans_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=config.K, help="number of clusters")
    parser.add_argument("--restarts", type=int, default=config.RESTARTS)
    parser.add_argument("--tol", type=float, default=config.TOL, help="relative inertia improvement to stop at")
    parser.add_argument("--max-iter", type=int, default=config.MAX_ITER)


def run_cluster(args: argparse.Namespace) -> int:
    reduced = read_table(args.input, args)
    cluster_stage(
        reduced, args.k, args.seed, args.restarts, args.tol, args.max_iter, args.jobs, out_dir(args)
    )
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("cluster", help="k-means++ clustering of a reduced table")
    add_table_args(parser)
    add_kmeans_args(parser)
    add_common_args(parser)
    parser.set_defaults(handler=run_cluster)

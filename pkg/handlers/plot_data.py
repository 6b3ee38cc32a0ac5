# handlers/plot_data.py
"""`export-plot-data`: projection and cluster-histogram CSVs per WSI."""

import argparse

from handlers.common import add_common_args, add_table_args, out_dir, read_table, require_file
from services.artifacts import read_assignment, read_ranking
from services.plot_data import export_plot_data

PLOT_DIR = "plot_data"


def run_export_plot_data(args: argparse.Namespace) -> int:
    reduced = read_table(args.input, args)
    assignment = read_assignment(require_file(args.assignment), reduced)
    ranking = read_ranking(require_file(args.ranking))
    export_plot_data(reduced, assignment, ranking, out_dir(args) / PLOT_DIR, args.groups, args.k)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("export-plot-data", help="CSV data for per-WSI distribution plots")
    add_table_args(parser)
    parser.add_argument("--assignment", required=True, help="assignment.csv from `cluster`")
    parser.add_argument("--ranking", required=True, help="ranking.ndjson from `rank`")
    parser.add_argument("--groups", nargs="*", default=None, help="group ids (default: first High, middle Med, last Low)")
    parser.add_argument("--k", type=int, default=None, help="number of clusters (default: from the ranking)")
    add_common_args(parser)
    parser.set_defaults(handler=run_export_plot_data)

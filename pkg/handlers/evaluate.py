# handlers/evaluate.py
"""
`evaluate` runs the High/Med/Low retraining experiment; `report` turns its
summary into per-condition CSV tables.
"""

import argparse

import pandas as pd

from config import config
from handlers.common import add_common_args, add_table_args, on_off, out_dir, read_table, require_file, train_config
from services.artifacts import read_json, read_ranking, write_json
from services.experiment import ExperimentConfig, ExperimentSummary, run_experiment, summary_table
from services.logger import logger

SUMMARY_FILE = "summary.json"
REPORT_FILE = "report.csv"
SIGNIFICANCE_FILE = "significance.csv"


def run_evaluate(args: argparse.Namespace) -> int:
    source = read_table(args.source, args, domain="source")
    target = read_table(args.input, args)
    ranking = read_ranking(require_file(args.ranking))

    experiment = ExperimentConfig(
        train=train_config(args),
        validation_fraction=args.validation_fraction,
        source_folds=args.folds,
        warm_start=args.warm_start,
        split_seed=args.seed,
        jobs=args.jobs,
    )
    seeds = [(args.seed + i) % 2**64 for i in range(args.seeds)]
    summary = run_experiment(source, target, ranking, seeds, experiment)
    write_json(summary.to_dict(), out_dir(args) / SUMMARY_FILE)
    return 0


def run_report(args: argparse.Namespace) -> int:
    summary = ExperimentSummary.from_dict(read_json(require_file(args.summary)))
    out = out_dir(args)
    table = summary_table(summary)
    table.to_csv(out / REPORT_FILE, index=False, lineterminator="\n", float_format="%.6f")
    pd.DataFrame(summary.significance).to_csv(
        out / SIGNIFICANCE_FILE, index=False, lineterminator="\n", float_format="%.6g"
    )
    with pd.option_context("display.width", 160, "display.max_columns", 20):
        logger.info("results over %d seed(s):\n%s", len(summary.seeds), table.round(3).to_string(index=False))
    return 0


def add_training_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=config.EPOCHS)
    parser.add_argument("--lr", type=float, default=config.LR)
    parser.add_argument("--batch", type=int, default=config.BATCH, help="patches per domain in a batch")
    parser.add_argument("--optimizer", choices=("adam", "sgd"), default=config.OPTIMIZER)
    parser.add_argument("--weight-decay", type=float, default=0.0)
    parser.add_argument("--early-stop", type=on_off, default=False, metavar="on|off")
    parser.add_argument("--patience", type=int, default=10)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("evaluate", help="retrain with High/Med/Low WSIs and score on target")
    add_table_args(parser, flag="--input")
    parser.add_argument("--source", required=True, help="labeled source table")
    parser.add_argument("--ranking", required=True, help="ranking.ndjson over the target table")
    parser.add_argument("--seeds", type=int, default=config.SEEDS, help="number of experiment seeds")
    parser.add_argument("--folds", type=int, default=5, help="source cross-validation folds")
    parser.add_argument("--validation-fraction", type=float, default=0.2)
    parser.add_argument("--warm-start", type=on_off, default=True, metavar="on|off")
    add_training_args(parser)
    add_common_args(parser)
    parser.set_defaults(handler=run_evaluate)

    parser = subparsers.add_parser("report", help="tabulate an experiment summary")
    parser.add_argument("--summary", required=True, help="summary.json from `evaluate`")
    add_common_args(parser)
    parser.set_defaults(handler=run_report)

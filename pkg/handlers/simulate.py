# handlers/simulate.py
"""`simulate`: write a synthetic source/target benchmark."""

import argparse

from config import config
from dataset import write_table
from handlers.common import add_common_args, out_dir, require_file, table_suffix
from services.artifacts import read_json, write_json
from services.simbench import generate, load_sim_config


def run_simulate(args: argparse.Namespace) -> int:
    payload = read_json(require_file(args.config)) if args.config else {}
    # An explicit --seed wins over the config file.
    if args.seed is not None:
        payload["seed"] = args.seed
    payload.setdefault("seed", config.SEED)
    sim_config = load_sim_config(payload)

    source, target, truth = generate(sim_config)
    out = out_dir(args)
    suffix = table_suffix(args.format)
    write_table(source, out / f"source{suffix}", args.format)
    write_table(target, out / f"target{suffix}", args.format)
    write_json(truth.to_dict(), out / "truth.json")
    write_json(sim_config.to_dict(), out / "sim_config.json")
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("simulate", help="generate a synthetic domain-shift benchmark")
    parser.add_argument("--config", default=None, help="JSON SimConfig")
    parser.add_argument("--format", choices=("csv", "binary"), default="csv", help="output table format")
    add_common_args(parser, seed_default=None)
    parser.set_defaults(handler=run_simulate)

# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Command line interface."""

import argparse
import logging
import os
import sys
from typing import List, Optional

import matplotlib
import pandas as pd

from ._config import AGENTS, REWARD_MODES, ExperimentConfig, load_config
from ._errors import M3TError
from ._harness import (
    load_backtest,
    load_market_data,
    run_backtest,
    run_macro_training,
    run_training,
    strategy_label,
)
from ._lob import write_day
from ._macro import write_profiles_csv

logger = logging.getLogger(__name__)


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="key=value configuration file")
    parent.add_argument("--seed", type=int, help="seed of agents and training")
    parent.add_argument("--agent", choices=AGENTS, help="execution strategy")
    parent.add_argument("--reward", choices=REWARD_MODES, help="intrinsic reward mode")
    parent.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging level (default INFO)",
    )
    return parent


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="m3t", description="Hierarchical reinforcement learning order execution."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write synthetic trading days")
    p.add_argument("--out", help="output directory (default <output_dir>/data)")

    p = sub.add_parser("profiles", parents=[common], help="write daily volume profiles")
    p.add_argument("--out", help="output CSV (default <output_dir>/profiles.csv)")

    sub.add_parser("train-macro", parents=[common], help="train volume profile estimators")
    sub.add_parser("train", parents=[common], help="train the execution agents")

    p = sub.add_parser("backtest", parents=[common], help="backtest a strategy on the test days")
    p.add_argument("--checkpoint-dir", help="agent checkpoint directory")
    p.add_argument("--trace-dir", help="write per-day ndjson step traces here")

    p = sub.add_parser("report", parents=[common], help="merge backtest results into reports")
    p.add_argument("results", nargs="+", help="backtest result JSON files")
    p.add_argument("--out", help="report directory (default <output_dir>/report)")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p.add_argument("--curve", action="append", default=[], help="learning curve CSV to plot")
    return parser


def _config(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(args.config, seed=args.seed, agent=args.agent, reward_mode=args.reward)


def _gen_data(config: ExperimentConfig, args: argparse.Namespace):
    out = args.out or os.path.join(config.output_dir, "data")
    os.makedirs(out, exist_ok=True)
    data = load_market_data(config)
    for day in data.history + data.days:
        base = os.path.join(out, day.day_id)
        write_day(day, base + ".snapshots.csv", base + ".trades.csv")
    logger.info("Wrote %d days to %s", len(data.history) + len(data.days), out)


def _profiles(config: ExperimentConfig, args: argparse.Namespace):
    out = args.out or os.path.join(config.output_dir, "profiles.csv")
    directory = os.path.dirname(out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    data = load_market_data(config)
    write_profiles_csv(out, data.day_ids, data.profiles)
    logger.info("Wrote %s", out)


def _backtest(config: ExperimentConfig, args: argparse.Namespace):
    report = run_backtest(config, args.checkpoint_dir, trace_dir=args.trace_dir)
    path = os.path.join(
        config.output_dir, f"backtest_{strategy_label(config)}_{config.dataset}.json"
    )
    report.save(path)
    logger.info("Wrote %s", path)
    print(f"{report.strategy} {report.dataset}: {report.mean:.2f} ± {report.std:.2f} bp")


def _report(config: ExperimentConfig, args: argparse.Namespace):
    # local import keeps the plotting stack out of the other commands
    from ._plot import plot_learning_curve
    from ._report import emit_report

    if args.figures or args.curve:
        matplotlib.use("Agg")
    out = args.out or os.path.join(config.output_dir, "report")
    emit_report([load_backtest(p) for p in args.results], out, figures=args.figures)
    for path in args.curve:
        name = os.path.splitext(os.path.basename(path))[0]
        plot = plot_learning_curve(pd.read_csv(path), title=name, show=False)
        plot.save(os.path.join(out, f"{name}.png"))


def main(argv: Optional[List[str]] = None) -> int:
    """Run the command line interface.

    Returns:
        Exit status: 0 on success, 2 on a package error.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        config = _config(args)
        if args.command == "gen-data":
            _gen_data(config, args)
        elif args.command == "profiles":
            _profiles(config, args)
        elif args.command == "train-macro":
            scores = run_macro_training(config)
            for kind, mse in scores.items():
                print(f"{kind}: test MSE {mse:.4f}e-3")
        elif args.command == "train":
            result = run_training(config)
            print(f"Trained {len(result.curve)} episodes; checkpoints in {config.output_dir}")
        elif args.command == "backtest":
            _backtest(config, args)
        elif args.command == "report":
            _report(config, args)
    except M3TError as exc:
        print(f"m3t: error: {exc}", file=sys.stderr)
        return 2
    return 0

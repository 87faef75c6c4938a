"""Command-line entry point: train / pathsurvey / analyze / synth."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import (ExperimentConfig, cmd_analyze, cmd_pathsurvey,
                      cmd_synth, cmd_train)


def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required,
                   help="experiment config (JSON)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--workers", type=int, help="worker count (overrides config)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="losspaths",
        description="Train small nets two ways, find low-loss paths between "
                    "the solutions, and analyze the solution-set geometry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the ensemble with both optimizers")
    _add_common(p)

    p = sub.add_parser("pathsurvey", help="barrier-height survey between solutions")
    _add_common(p)
    p.add_argument("--landscape", choices=("train", "test"), default="train")
    p.add_argument("--solutions", help="directory holding stored solution sets")

    p = sub.add_parser("analyze", help="kPCA, shell, and component statistics")
    _add_common(p)
    p.add_argument("--solutions", help="directory holding stored solution sets")

    p = sub.add_parser("synth", help="closed-form 2D landscape path experiment")
    _add_common(p, config_required=False)

    return parser


def load_config(args):
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        config = ExperimentConfig()
    if args.seed is not None:
        config.master_seed = args.seed
    if args.workers is not None:
        config.workers = args.workers
    if args.out:
        config.output_dir = args.out
    return config


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    config = load_config(args)

    if args.command == "train":
        sets = cmd_train(config, out_dir=args.out)
        for label, sset in sorted(sets.items()):
            print(f"{label}: {len(sset)} solutions")
    elif args.command == "pathsurvey":
        medians = cmd_pathsurvey(config, out_dir=args.out,
                                 solutions_dir=args.solutions,
                                 landscape_choice=args.landscape)
        for label, m in sorted(medians.items()):
            print(f"median height {label} ({args.landscape} landscape): {m:.6g}")
    elif args.command == "analyze":
        comp = cmd_analyze(config, out_dir=args.out, solutions_dir=args.solutions)
        for label, (mu, sigma) in sorted(comp.items()):
            print(f"{label}: mu = {mu:.6g}, sigma = {sigma:.6g}")
    elif args.command == "synth":
        heights = cmd_synth(config, out_dir=args.out)
        for key, h in heights.items():
            print(f"height {key}: {h:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

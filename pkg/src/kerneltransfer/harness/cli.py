"""The ktx command line.

Subcommands: train, transfer, eval, theory, scaling, experiment.
Global flags: --config, --seed, --out, --threads, --no-figures.
Exit codes: 0 all cells passed, 1 usage/configuration error, 2 at least one
validation cell failed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ..errors import KernelTransferError
from .config import load_config
from . import runner

USAGE_ERROR, VALIDATION_FAILURE = 1, 2


class Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract reserves 2 for
    # validation failures, so remap to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _common(sub: argparse.ArgumentParser):
    sub.add_argument("--config", type=Path, help="INI config file")
    sub.add_argument("--seed", type=int, help="master seed (KT_SEED env overrides)")
    sub.add_argument("--out", type=Path, help="output directory")
    sub.add_argument("--threads", type=int, help="worker threads for sweeps")
    sub.add_argument("--no-figures", action="store_true",
                     help="skip PNG rendering next to the CSV outputs")


def build_parser() -> Parser:
    parser = Parser(prog="ktx", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("train", "fit a source kernel model and save it"),
            ("transfer", "fit a transfer model over a saved source model"),
            ("eval", "evaluate a saved model on a test split"),
            ("theory", "run the closed-form vs Monte Carlo validation grid"),
            ("scaling", "fit the logarithmic scaling law to a points CSV"),
            ("experiment", "run a full train/transfer/eval sweep")):
        sub = subs.add_parser(name, help=help_text)
        _common(sub)
        if name in ("transfer", "eval"):
            sub.add_argument("--model", type=Path, help="saved model (.npz)")
        if name == "scaling":
            sub.add_argument("--points", type=Path, required=True,
                             help="CSV with two columns: x, y")
            sub.add_argument("--at", type=float, action="append", default=[],
                             help="x value to extrapolate to (repeatable)")
        if name == "theory":
            sub.add_argument("--trials", type=int, help="MC trials per cell")
            sub.add_argument("--draws", type=int, help="task draws per cell")
    return parser


def _print_summary(report, paths):
    by_kind = report.summary.get("by_kind", {})
    for kind, stats in sorted(by_kind.items()):
        status = "pass" if stats["failed"] == 0 else f"{stats['failed']} FAILED"
        print(f"[{kind}] {stats['cells']} cells: {status}")
    for label, path in paths.items():
        print(f"{label}: {path}")
    print(f"determinism hash: {report.summary.get('determinism_hash', '')}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"task": args.command, "seed": args.seed, "out": args.out,
                 "threads": args.threads,
                 "model_in": getattr(args, "model", None)}
    if args.no_figures:
        overrides["figures"] = False
    try:
        config = load_config(args.config, overrides=overrides)
        if args.command == "theory":
            theory = config.theory
            if args.trials is not None:
                theory = replace(theory, trials=args.trials)
            if args.draws is not None:
                theory = replace(theory, draws=args.draws)
            config = replace(config, theory=theory)
            report = runner.run_theory_validation(config)
        elif args.command == "experiment":
            report = runner.run_experiment(config)
        elif args.command == "train":
            report = runner.run_train(config)
        elif args.command == "transfer":
            report = runner.run_transfer(config)
        elif args.command == "eval":
            report = runner.run_eval(config)
        else:
            report = runner.run_scaling(config, args.points, tuple(args.at))
    except KernelTransferError as exc:
        print(f"ktx {args.command}: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"ktx {args.command}: {exc}", file=sys.stderr)
        return USAGE_ERROR
    paths = runner.write_outputs(report, config, args.command)
    _print_summary(report, paths)
    if not report.passed():
        print(f"{len(report.failures())} validation cell(s) failed",
              file=sys.stderr)
        return VALIDATION_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())

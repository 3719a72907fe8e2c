"""Command-line entry points: train, metrics, plot."""

from __future__ import annotations

import argparse
import os
from pathlib import Path

from .config import ALGOS, build_config
from .harness import emit_plot, metrics_table, scan_runs, train_runs


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualsys",
        description="Dual-system grasp learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one experiment per seed")
    train.add_argument("--config", help="key=value config file")
    train.add_argument("--algo", choices=ALGOS)
    train.add_argument("--reward", choices=("dense", "sparse"))
    train.add_argument("--episodes", type=int)
    group = train.add_mutually_exclusive_group()
    group.add_argument("--seed", type=int)
    group.add_argument("--seeds", help="inclusive range, e.g. 1..5")
    train.add_argument("--out", default="runs", help="output directory")

    metrics = sub.add_parser("metrics", help="summarize a results directory")
    metrics.add_argument("--in", dest="in_dir", required=True)

    plot = sub.add_parser("plot", help="plot learning curves to an SVG file")
    plot.add_argument("--in", dest="in_dir", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--window", type=int, default=250,
                      help="smoothing window in episodes")
    return parser


def _parse_seed_range(text: str) -> list[int]:
    lo_text, sep, hi_text = text.partition("..")
    if not sep:
        raise SystemExit(f"--seeds expects A..B, got {text!r}")
    try:
        lo, hi = int(lo_text), int(hi_text)
    except ValueError:
        raise SystemExit(f"--seeds expects integers, got {text!r}") from None
    if hi < lo:
        raise SystemExit(f"--seeds range is empty: {text}")
    return list(range(lo, hi + 1))


def _cmd_train(args) -> int:
    file_text = Path(args.config).read_text() if args.config else None
    overrides = {}
    if args.algo:
        overrides["algo"] = args.algo
    if args.reward:
        overrides["env.reward_mode"] = args.reward
    if args.episodes is not None:
        overrides["episodes"] = str(args.episodes)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    config = build_config(file_text, os.environ, overrides)
    seeds = (_parse_seed_range(args.seeds) if args.seeds else [config.seed])
    for path in train_runs(config, seeds, args.out):
        print(f"wrote {path}")
    return 0


def _cmd_metrics(args) -> int:
    print(metrics_table(scan_runs(args.in_dir)))
    return 0


def _cmd_plot(args) -> int:
    runs = scan_runs(args.in_dir)
    if not runs:
        raise SystemExit(f"no run CSVs found in {args.in_dir}")
    groups = {}
    for (algo, reward), by_seed in runs.items():
        groups[f"{algo} ({reward})"] = [
            [r.reward for r in records] for _, records in sorted(by_seed.items())]
    emit_plot(groups, args.out, window=args.window)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"train": _cmd_train, "metrics": _cmd_metrics,
               "plot": _cmd_plot}[args.command]
    return handler(args)


if __name__ == "__main__":
    raise SystemExit(main())

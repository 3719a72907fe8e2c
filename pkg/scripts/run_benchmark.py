#!/usr/bin/env python3
"""Train the algorithm grid and summarize it like the results table.

Example (quick smoke run):
    python3 scripts/run_benchmark.py --episodes 50 --seeds 0 1 --out runs/smoke
"""

import argparse
from pathlib import Path

from dualsys.config import ALGOS, Config, apply_overrides
from dualsys.harness import emit_plot, metrics_table, scan_runs, train_runs


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--algos", nargs="+", default=list(ALGOS),
                        choices=ALGOS)
    parser.add_argument("--rewards", nargs="+", default=["dense", "sparse"],
                        choices=("dense", "sparse"))
    parser.add_argument("--episodes", type=int, default=2000)
    parser.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2, 3, 4])
    parser.add_argument("--observation", default="vector",
                        choices=("vector", "image_sim", "image_real_like"))
    parser.add_argument("--window", type=int, default=250)
    parser.add_argument("--out", default="runs/benchmark")
    parser.add_argument("--set", nargs="*", default=[], metavar="KEY=VALUE",
                        help="extra config overrides, e.g. batch_size=64")
    args = parser.parse_args()

    extra = dict(item.split("=", 1) for item in args.set)
    for algo in args.algos:
        for reward in args.rewards:
            config = Config(algo=algo, episodes=args.episodes)
            config.env.reward_mode = reward
            config.env.observation_mode = args.observation
            apply_overrides(config, extra)
            config.validate()
            for path in train_runs(config, args.seeds, args.out):
                print(f"wrote {path}")

    runs = scan_runs(args.out)
    print()
    print(metrics_table(runs))
    for reward in args.rewards:
        groups = {algo: [[r.reward for r in records]
                         for _, records in sorted(by_seed.items())]
                  for (algo, r_mode), by_seed in runs.items()
                  if r_mode == reward}
        if groups:
            target = Path(args.out) / f"curves_{reward}.svg"
            emit_plot(groups, target, window=args.window)
            print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

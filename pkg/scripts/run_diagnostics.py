#!/usr/bin/env python3
"""Run one arbitrated experiment and plot its internal behavior:
mean model error, decision frequencies, and map growth per episode.

Example:
    python3 scripts/run_diagnostics.py --episodes 200 --out runs/diag
"""

import argparse
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dualsys.config import Config, apply_overrides
from dualsys.harness import emit_csv, run_experiment, run_name, smooth


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--algo", default="cacla_im2c")
    parser.add_argument("--reward", default="sparse",
                        choices=("dense", "sparse"))
    parser.add_argument("--episodes", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--window", type=int, default=25)
    parser.add_argument("--out", default="runs/diagnostics")
    parser.add_argument("--set", nargs="*", default=[], metavar="KEY=VALUE")
    args = parser.parse_args()

    config = Config(algo=args.algo, episodes=args.episodes, seed=args.seed)
    config.env.reward_mode = args.reward
    apply_overrides(config, dict(item.split("=", 1) for item in args.set))
    config.validate()

    records = run_experiment(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{run_name(config)}.csv"
    emit_csv(records, csv_path)
    print(f"wrote {csv_path}")

    episodes = np.array([r.episode for r in records])
    fig, axes = plt.subplots(3, 1, figsize=(7, 9), sharex=True)

    axes[0].plot(episodes, smooth([r.model_err for r in records], args.window))
    axes[0].set_ylabel("mean model error")

    axes[1].plot(episodes, smooth([r.mf for r in records], args.window),
                 label="model-free")
    axes[1].plot(episodes, smooth([r.mb for r in records], args.window),
                 label="model-based")
    axes[1].set_ylabel("decisions / episode")
    axes[1].legend(loc="best", fontsize=8)

    axes[2].plot(episodes, [r.nodes for r in records])
    axes[2].set_ylabel("map nodes")
    axes[2].set_xlabel("episode")

    fig.tight_layout()
    svg_path = out / f"{run_name(config)}_diagnostics.svg"
    fig.savefig(svg_path, format="svg")
    print(f"wrote {svg_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

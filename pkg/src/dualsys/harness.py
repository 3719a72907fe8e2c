"""Experiment driver: training loops, metrics, CSV output, and plots.

Run artifacts are one CSV per (algo, reward mode, seed), named
``{algo}_{reward_mode}_seed{seed}.csv``, so a results directory can be
re-aggregated without any side channel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import nets
from .config import ALGOS, Config
from .env import GraspEnv
from .meta import DualSystemAgent, decision_stats

ACTION_DIM = 3
CSV_HEADER = "episode,reward,steps,mf,mb,model_err,nodes,imagined"
REWARD_LABELS = {"dense": "Dense Reward", "sparse": "Sparse Reward"}


@dataclass
class EpisodeRecord:
    episode: int
    reward: float      # sum of extrinsic rewards over the episode
    steps: int
    mf: int            # model-free decisions
    mb: int            # model-based decisions
    model_err: float   # mean pre-update local-model error
    nodes: int         # map size at episode end
    imagined: int      # imagined transitions stored during the episode


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent env and agent generators derived from one experiment seed."""
    return (np.random.default_rng(np.random.SeedSequence([seed, 0])),
            np.random.default_rng(np.random.SeedSequence([seed, 1])))


def run_experiment(config: Config) -> list[EpisodeRecord]:
    config.validate()
    env_rng, agent_rng = seed_streams(config.seed)
    env = GraspEnv(config.env)
    agent = DualSystemAgent(config, config.env.observation_dim, ACTION_DIM,
                            agent_rng)
    records = []
    for episode in range(config.episodes):
        obs = env.reset(env_rng)
        reward_sum = 0.0
        errors = []
        decisions = []
        imagined_total = 0
        done = False
        while not done:
            action, decision, imagined = agent.select_action(obs)
            obs_next, r_ext, done, _ = env.step(action)
            outcome = agent.observe(obs, action, r_ext, obs_next, done,
                                    decision, len(imagined))
            reward_sum += r_ext
            errors.append(outcome.model_error)
            decisions.append(decision)
            imagined_total += len(imagined)
            obs = obs_next
        mf, mb = decision_stats(decisions)
        records.append(EpisodeRecord(
            episode=episode,
            reward=float(reward_sum),
            steps=len(decisions),
            mf=mf,
            mb=mb,
            model_err=float(np.mean(errors)),
            nodes=agent.node_count,
            imagined=imagined_total,
        ))
    return records


def greedy_action(agent: DualSystemAgent, obs) -> np.ndarray:
    """The reactive policy without exploration noise, for evaluation only."""
    phi = agent.auto.encode(np.ravel(np.asarray(obs, dtype=float)))
    return nets.forward(agent.ac.actor, phi)


def evaluate_success(agent: DualSystemAgent, env_config, episodes: int,
                     seed: int) -> float:
    """Fraction of evaluation episodes the greedy policy ends in a grasp."""
    env = GraspEnv(env_config)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    grasped = 0
    for _ in range(episodes):
        obs = env.reset(rng)
        done = False
        while not done:
            obs, _, done, outcome = env.step(greedy_action(agent, obs))
        if env.outcome == "grasped":
            grasped += 1
    return grasped / episodes


def sample_render_pairs(env_config, n: int, seed: int
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Matched flat (simulated, realistic) renders of n random scene states."""
    env = GraspEnv(env_config)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    w = env_config.workspace
    sims, reals = [], []
    for _ in range(n):
        env.reset(rng)
        env.hand = rng.uniform(-w, w, 2)
        env.aperture = float(rng.uniform(-1.0, 1.0))
        sims.append(env.render("image_sim").ravel())
        reals.append(env.render("image_real_like").ravel())
    return np.array(sims), np.array(reals)


# -------------------------------------------------------------------- metrics

def compute_auc(records) -> float:
    """Mean episodic reward, normalized by the per-episode maximum of 1."""
    if not records:
        raise ValueError("cannot compute AuC of an empty run")
    return float(np.mean([r.reward for r in records]))


def compute_final_perf(records, n: int = 500) -> tuple[float, float]:
    """Mean and (population) standard deviation over the last n episodes."""
    if len(records) < n:
        raise ValueError(f"need at least {n} records, got {len(records)}")
    tail = np.array([r.reward for r in records[-n:]])
    return float(np.mean(tail)), float(np.std(tail))


def smooth(series, window: int) -> list[float]:
    """Centered moving average; edge windows shrink to the available span."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.array([getattr(v, "reward", v) for v in series], dtype=float)
    n = values.size
    if n == 0:
        return []
    prefix = np.concatenate([[0.0], np.cumsum(values)])
    k = np.arange(n)
    lo = np.maximum(0, k - (window - 1) // 2)
    hi = np.minimum(n, k + window // 2 + 1)
    return ((prefix[hi] - prefix[lo]) / (hi - lo)).tolist()


def aggregate_runs(runs, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Smooth each seed's curve, then mean and std across seeds per episode.

    Runs of unequal length are truncated to the shortest before aggregation.
    """
    if not runs:
        raise ValueError("no runs to aggregate")
    length = min(len(r) for r in runs)
    if length == 0:
        raise ValueError("cannot aggregate empty runs")
    stacked = np.array([smooth(list(r)[:length], window) for r in runs])
    return stacked.mean(axis=0), stacked.std(axis=0)


# ------------------------------------------------------------------ csv files

def emit_csv(records, path) -> None:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(f"{r.episode},{float(r.reward)!r},{r.steps},{r.mf},"
                     f"{r.mb},{float(r.model_err)!r},{r.nodes},{r.imagined}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> list[EpisodeRecord]:
    lines = Path(path).read_text().strip("\n").split("\n")
    if lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {lines[0]!r} in {path}")
    records = []
    for line in lines[1:]:
        if not line:
            continue
        cols = line.split(",")
        if len(cols) != 8:
            raise ValueError(f"expected 8 columns, got {len(cols)} in {path}")
        records.append(EpisodeRecord(
            episode=int(cols[0]), reward=float(cols[1]), steps=int(cols[2]),
            mf=int(cols[3]), mb=int(cols[4]), model_err=float(cols[5]),
            nodes=int(cols[6]), imagined=int(cols[7])))
    return records


def run_name(config: Config) -> str:
    return f"{config.algo}_{config.env.reward_mode}_seed{config.seed}"


def parse_run_name(stem: str):
    """Invert run_name; returns (algo, reward_mode, seed) or None."""
    if "_seed" not in stem:
        return None
    head, _, seed_text = stem.rpartition("_seed")
    if "_" not in head or not seed_text.isdigit():
        return None
    algo, _, reward = head.rpartition("_")
    if algo not in ALGOS or reward not in REWARD_LABELS:
        return None
    return algo, reward, int(seed_text)


def scan_runs(directory) -> dict:
    """Map (algo, reward_mode) -> {seed: records} for every run CSV found."""
    runs: dict = {}
    for path in sorted(Path(directory).glob("*.csv")):
        parsed = parse_run_name(path.stem)
        if parsed is None:
            continue
        algo, reward, seed = parsed
        runs.setdefault((algo, reward), {})[seed] = read_csv(path)
    return runs


# -------------------------------------------------------------------- reports

def metrics_table(runs: dict, final_n: int = 500) -> str:
    """Summary table: one column per algorithm, AuC and Final Perf rows
    grouped by reward mode. Final Perf is the across-seed mean of per-seed
    means, plus/minus the across-seed deviation (the single run's own
    deviation when only one seed is present)."""
    if not runs:
        return "no runs found"
    algos = [a for a in ALGOS if any(key[0] == a for key in runs)]
    rewards = [m for m in REWARD_LABELS if any(key[1] == m for key in runs)]

    def auc_cell(by_seed):
        return f"{np.mean([compute_auc(r) for r in by_seed.values()]):.3f}"

    def final_cell(by_seed):
        pairs = [compute_final_perf(r, min(final_n, len(r)))
                 for r in by_seed.values()]
        means = [m for m, _ in pairs]
        spread = np.std(means) if len(means) > 1 else pairs[0][1]
        return f"{np.mean(means):.2f} ± {spread:.2f}"

    width = max(12, max(len(a) for a in algos) + 2)
    label_w = 14
    out = [" " * label_w + "".join(a.rjust(width) for a in algos)]
    for reward in rewards:
        out.append(REWARD_LABELS[reward])
        for row_label, cell in (("AuC", auc_cell), ("Final Perf.", final_cell)):
            cells = []
            for algo in algos:
                by_seed = runs.get((algo, reward))
                cells.append(cell(by_seed) if by_seed else "-")
            out.append(f"  {row_label}".ljust(label_w)
                       + "".join(c.rjust(width) for c in cells))
    return "\n".join(out)


def emit_plot(groups: dict, path, window: int = 250) -> None:
    """Write smoothed learning curves with a one-std band to an SVG file.

    groups maps a curve label to a list of per-seed reward series.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in sorted(groups):
        mean, std = aggregate_runs(groups[label], window)
        x = np.arange(mean.size)
        line, = ax.plot(x, mean, label=label)
        if len(groups[label]) > 1:
            ax.fill_between(x, mean - std, mean + std, alpha=0.25,
                            color=line.get_color(), linewidth=0)
    ax.set_xlabel("episode")
    ax.set_ylabel("episodic reward")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def train_runs(config: Config, seeds, out_dir) -> list[Path]:
    """Run the configured experiment once per seed, writing one CSV each."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for seed in seeds:
        cfg = replace(config, seed=seed)
        records = run_experiment(cfg)
        path = out / f"{run_name(cfg)}.csv"
        emit_csv(records, path)
        written.append(path)
    return written

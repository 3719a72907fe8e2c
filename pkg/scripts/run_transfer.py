#!/usr/bin/env python3
"""Train on simulated renders, align the encoder on paired realistic renders,
and report latent-distance reduction plus grasp-success retention.

Example (quick smoke run):
    python3 scripts/run_transfer.py --episodes 100 --pairs 200 --align-epochs 20
"""

import argparse
from dataclasses import replace

import numpy as np

from dualsys.config import Config, apply_overrides
from dualsys.env import GraspEnv
from dualsys.harness import (ACTION_DIM, evaluate_success, run_experiment,
                             sample_render_pairs, seed_streams)
from dualsys.meta import DualSystemAgent
from dualsys.perception import align_encoders, mean_pair_distance


def train_agent(config: Config) -> DualSystemAgent:
    """run_experiment keeps its agent private, so rebuild the same loop here."""
    env_rng, agent_rng = seed_streams(config.seed)
    env = GraspEnv(config.env)
    agent = DualSystemAgent(config, config.env.observation_dim, ACTION_DIM,
                            agent_rng)
    for _ in range(config.episodes):
        obs = env.reset(env_rng)
        done = False
        while not done:
            action, decision, imagined = agent.select_action(obs)
            obs_next, r_ext, done, _ = env.step(action)
            agent.observe(obs, action, r_ext, obs_next, done, decision,
                          len(imagined))
            obs = obs_next
    return agent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--algo", default="ddpg_im2c")
    parser.add_argument("--episodes", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--pairs", type=int, default=2000)
    parser.add_argument("--align-epochs", type=int, default=200)
    parser.add_argument("--eval-episodes", type=int, default=100)
    parser.add_argument("--image-size", type=int, default=16)
    parser.add_argument("--set", nargs="*", default=[], metavar="KEY=VALUE")
    args = parser.parse_args()

    config = Config(algo=args.algo, episodes=args.episodes, seed=args.seed,
                    align_epochs=args.align_epochs)
    config.env.observation_mode = "image_sim"
    config.env.image_size = args.image_size
    apply_overrides(config, dict(item.split("=", 1) for item in args.set))
    config.validate()

    print(f"training {config.algo} on simulated renders "
          f"({config.episodes} episodes)")
    agent = train_agent(config)

    sim_env = config.env
    real_env = replace(config.env, observation_mode="image_real_like")
    sim_success = evaluate_success(agent, sim_env, args.eval_episodes,
                                   seed=config.seed + 1)
    real_before = evaluate_success(agent, real_env, args.eval_episodes,
                                   seed=config.seed + 1)

    sim, real = sample_render_pairs(sim_env, args.pairs, seed=config.seed)
    dist_before = mean_pair_distance(agent.auto, sim, real)
    align_encoders(agent.auto, sim, real, epochs=config.align_epochs,
                   batch=config.align_batch, lr=config.align_lr,
                   rng=np.random.default_rng(config.seed + 2))
    dist_after = mean_pair_distance(agent.auto, sim, real)
    real_after = evaluate_success(agent, real_env, args.eval_episodes,
                                  seed=config.seed + 1)

    reduction = 1.0 - dist_after / dist_before if dist_before else 0.0
    print(f"latent pair distance: {dist_before:.4f} -> {dist_after:.4f} "
          f"({100 * reduction:.1f}% reduction)")
    print(f"grasp success: sim {sim_success:.2f}, "
          f"realistic before {real_before:.2f}, after {real_after:.2f}")
    if sim_success > 0:
        retention = real_after / sim_success
        print(f"success retention vs sim: {100 * retention:.1f}%")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

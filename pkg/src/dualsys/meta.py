"""Arbitration between the planner and the reactive actor.

The agent keeps a topological map over the latent space. Each map node owns a
local dynamics model whose prediction-error history yields a learning-progress
signal. Positive or flat progress at the current node hands control to the
gradient planner (or, for the imagination-only variant, keeps the reactive
policy but harvests imagined transitions); negative or not-yet-defined
progress falls back to the reactive actor. Negated learning progress is added
to the external reward so the system seeks regions it is still learning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import nets
from .config import ALGOS, Config
from .control import (ActorCritic, PixelTransition, ReplayBuffer, TargetNets,
                      cacla_actor_update, critic_target, critic_update,
                      ddpg_actor_update, stack_latent, stack_pixel)
from .itm import ItmMap
from .perception import Autoencoder, combined_update
from .planner import (PlanningError, make_local_model, model_update,
                      plan_optimize, rollout_with_imagination)


@dataclass(frozen=True)
class AlgoMode:
    """Feature switches that distinguish the algorithm variants."""

    actor_kind: str       # "ddpg" or "cacla"
    arbitrate: bool       # keep a map and consult learning progress
    plan: bool            # optimize planned action sequences
    imagine: bool         # store model rollouts as latent transitions
    dual_buffers: bool    # separate pixel and latent replay


ALGO_MODES = {
    "ddpg": AlgoMode("ddpg", False, False, False, False),
    "cacla": AlgoMode("cacla", False, False, False, False),
    "ddpg_im2c": AlgoMode("ddpg", True, True, False, False),
    "cacla_im2c": AlgoMode("cacla", True, True, False, False),
    "ddpg_la_imagination": AlgoMode("ddpg", True, False, True, True),
    "ddpg_i2a": AlgoMode("ddpg", True, True, True, True),
}

assert set(ALGO_MODES) == set(ALGOS)


@dataclass
class Decision:
    """How one action was chosen."""

    kind: str                 # "model_free" or "model_based"
    horizon: int              # planned steps ahead (0 for model-free)
    node: Optional[int]       # matched map node, None without a map
    lp: Optional[float]       # learning progress at that node, None if undefined
    fallback: bool = False    # planner failed and the reactive actor stepped in


@dataclass
class StepOutcome:
    """Everything the training loop needs to log about one environment step."""

    action: np.ndarray
    r_ext: float
    r_int: float
    r_total: float
    decision: Decision
    imagined_count: int
    model_error: float


def decision_stats(decisions) -> tuple[int, int]:
    """Count (model_free, model_based) decisions."""
    mf = mb = 0
    for d in decisions:
        if d.kind == "model_based":
            mb += 1
        else:
            mf += 1
    return mf, mb


class DualSystemAgent:
    """Owns the networks, buffers, and map for one algorithm variant."""

    def __init__(self, config: Config, obs_dim: int, action_dim: int,
                 rng: np.random.Generator):
        config.validate()
        self.config = config
        self.mode = ALGO_MODES[config.algo]
        self.rng = rng
        self.obs_dim = obs_dim
        self.action_dim = action_dim

        h = config.hidden_units
        self.auto = Autoencoder.build(obs_dim, h, config.latent_dim, rng)
        self.ac = ActorCritic.build(config.latent_dim, action_dim, h, h, rng)
        self.targets = TargetNets(
            enc=nets.clone_params(self.auto.enc),
            critic=nets.clone_params(self.ac.critic),
            actor=nets.clone_params(self.ac.actor),
        )

        self.itm: Optional[ItmMap] = None
        if self.mode.arbitrate:
            def factory():
                return make_local_model(config.latent_dim, action_dim,
                                        self.rng, hidden=config.model_hidden)

            self.itm = ItmMap(
                rng.standard_normal(config.latent_dim),
                rng.standard_normal(config.latent_dim),
                resolution=config.map_resolution,
                window=config.error_window,
                lag=config.progress_lag,
                model_factory=factory,
            )

        pixel_cap = (config.pixel_capacity if self.mode.dual_buffers
                     else config.buffer_capacity)
        self.pixel_buffer = ReplayBuffer(pixel_cap)
        self.latent_buffer: Optional[ReplayBuffer] = None
        if self.mode.dual_buffers:
            self.latent_buffer = ReplayBuffer(config.latent_capacity)

    @property
    def node_count(self) -> int:
        return len(self.itm.nodes) if self.itm is not None else 0

    def _noisy(self, action: np.ndarray) -> np.ndarray:
        if self.config.noise_scale > 0.0:
            action = action + self.config.noise_scale * self.rng.standard_normal(
                action.shape)
        return np.clip(action, -1.0, 1.0)

    def select_action(self, obs) -> tuple[np.ndarray, Decision, list]:
        """Pick an action; returns (action, decision, imagined transitions stored)."""
        obs = np.ravel(np.asarray(obs, dtype=float))
        phi = self.auto.encode(obs)

        if not self.mode.arbitrate:
            action = self._noisy(nets.forward(self.ac.actor, phi))
            return action, Decision("model_free", 0, None, None), []

        # Adapt first, then re-match: if adaptation created a node at phi, that
        # node is now the best match and its (undefined) progress drives the
        # decision, so the planner and the decision agree on the start node.
        self.itm.adapt(phi)
        best = self.itm.nearest(phi)
        lp = self.itm.lp(best)

        if lp is None or lp < 0.0:
            action = self._noisy(nets.forward(self.ac.actor, phi))
            return action, Decision("model_free", 0, best, lp), []

        trace, imagined = rollout_with_imagination(
            self.itm, self.ac.actor, phi, self.config.max_plan_depth)

        if self.mode.plan:
            try:
                plan = plan_optimize(
                    self.itm, self.ac.actor, phi,
                    self.config.target_return, self.config.plan_lr,
                    self.config.plan_steps, self.config.max_plan_depth,
                    trace=trace)
            except PlanningError:
                action = self._noisy(nets.forward(self.ac.actor, phi))
                return action, Decision("model_free", 0, best, lp,
                                        fallback=True), []
            stored = self._store_imagined(imagined)
            action = self._noisy(plan.actions[0])
            return action, Decision("model_based", plan.horizon, best, lp), stored

        # Imagination without planning: act reactively, keep the rollout.
        stored = self._store_imagined(imagined)
        action = self._noisy(nets.forward(self.ac.actor, phi))
        return action, Decision("model_free", 0, best, lp), stored

    def _store_imagined(self, imagined: list) -> list:
        if not self.mode.imagine or self.latent_buffer is None:
            return []
        for transition in imagined:
            self.latent_buffer.store(transition)
        return imagined

    def observe(self, obs, action, r_ext: float, obs_next, terminal: bool,
                decision: Decision, imagined_count: int = 0) -> StepOutcome:
        """Digest one real transition: model update, rewards, replay, learning."""
        obs = np.ravel(np.asarray(obs, dtype=float))
        obs_next = np.ravel(np.asarray(obs_next, dtype=float))
        action = np.asarray(action, dtype=float)

        model_error = 0.0
        r_int = 0.0
        if self.mode.arbitrate and decision.node is not None:
            phi = self.auto.encode(obs)
            phi_next = self.auto.encode(obs_next)
            node = self.itm.nodes[decision.node]
            model_error = model_update(node.model, phi, action, r_ext,
                                       phi_next, self.config.lr_model)
            node.record_error(model_error)
            r_int = node.intrinsic_reward()

        r_total = r_ext + r_int
        self.pixel_buffer.store(
            PixelTransition(obs, action, r_total, r_ext, obs_next, terminal))

        for _ in range(self.config.updates_per_step):
            self._gradient_phase()
        self._soft_updates()

        return StepOutcome(action, float(r_ext), float(r_int), float(r_total),
                           decision, imagined_count, float(model_error))

    def _gradient_phase(self) -> None:
        cfg = self.config
        if len(self.pixel_buffer) < cfg.batch_size:
            return
        batch = self.pixel_buffer.sample(cfg.batch_size, self.rng)
        s, a, r, s_next, terminal = stack_pixel(batch)

        if not self.mode.dual_buffers:
            _, phi, y = combined_update(
                self.auto, self.ac.critic, self.ac.critic_adam,
                self.targets.enc, self.targets.critic, self.targets.actor,
                s, a, r, s_next, terminal,
                rec_weight=cfg.rec_weight, value_weight=cfg.value_weight,
                gamma=cfg.gamma, lr=cfg.lr_critic, mode="joint")
            self._actor_step(phi, a, y)
            return

        # Dual-buffer variants train the critic and actor on one pixel batch
        # and one latent batch each, the encoder on the pixel batch alone.
        _, phi, y = combined_update(
            self.auto, self.ac.critic, self.ac.critic_adam,
            self.targets.enc, self.targets.critic, self.targets.actor,
            s, a, r, s_next, terminal,
            rec_weight=cfg.rec_weight, value_weight=cfg.value_weight,
            gamma=cfg.gamma, lr=cfg.lr_critic, mode="encoder_only")
        critic_update(self.ac, phi, a, y, cfg.lr_critic)

        latent = None
        if self.latent_buffer is not None and len(self.latent_buffer) > 0:
            lbatch = self.latent_buffer.sample(cfg.batch_size, self.rng)
            lphi, la, lr_, lphi_next = stack_latent(lbatch)
            ly = critic_target(self.targets, lr_, lphi_next, cfg.gamma)
            critic_update(self.ac, lphi, la, ly, cfg.lr_critic)
            latent = (lphi, la, ly)

        self._actor_step(phi, a, y)
        if latent is not None:
            self._actor_step(*latent)

    def _actor_step(self, phi: np.ndarray, a: np.ndarray,
                    y: np.ndarray) -> None:
        cfg = self.config
        if self.mode.actor_kind == "ddpg":
            ddpg_actor_update(self.ac, phi, cfg.lr_actor)
            return
        # The positive-temporal-difference actor regresses towards executed
        # actions that beat the critic's current estimate.
        q = nets.forward(self.ac.critic,
                         np.concatenate([phi, a], axis=1))[:, 0]
        cacla_actor_update(self.ac, phi, a, y - q, cfg.lr_actor)

    def _soft_updates(self) -> None:
        tau = self.config.tau
        nets.soft_update(self.targets.enc, self.auto.enc, tau)
        nets.soft_update(self.targets.critic, self.ac.critic, tau)
        nets.soft_update(self.targets.actor, self.ac.actor, tau)

"""Node-local latent world models and gradient-based action planning.

Each map node owns a small dynamics/reward model pair trained online on
the transitions that match it.  Planning unrolls those models from the
current latent state, re-matching the best node each step while its
learning progress stays non-negative, then refines the proposed action
sequence by descending the squared gap to a target return.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets
from .control import LatentTransition
from .itm import ItmMap


class PlanningError(RuntimeError):
    """Plan optimization produced a non-finite quantity."""


@dataclass
class LocalModel:
    """Dynamics head (latent+action -> next latent) and reward head."""

    dyn: nets.ParamSet
    rew: nets.ParamSet
    dyn_adam: nets.AdamState
    rew_adam: nets.AdamState


def make_local_model(latent_dim: int, action_dim: int,
                     rng: np.random.Generator, hidden: int = 20) -> LocalModel:
    dyn = nets.init_net([latent_dim + action_dim, hidden, latent_dim],
                        ["tanh", "linear"], rng)
    rew = nets.init_net([latent_dim + action_dim, hidden, 1],
                        ["tanh", "linear"], rng)
    return LocalModel(dyn, rew,
                      nets.AdamState.for_params(dyn),
                      nets.AdamState.for_params(rew))


def model_predict(model: LocalModel, phi: np.ndarray,
                  a: np.ndarray) -> tuple[np.ndarray, float]:
    """One deterministic step of both heads on a single latent/action pair."""
    x = np.concatenate([np.asarray(phi, dtype=float), np.asarray(a, dtype=float)])
    phi_next = nets.forward(model.dyn, x)
    r_hat = float(nets.forward(model.rew, x)[0])
    return phi_next, r_hat


def model_grads(model: LocalModel, phi: np.ndarray, a: np.ndarray,
                r_ext: float, phi_next: np.ndarray):
    """Loss and gradients of |dyn(phi,a) - phi_next|^2 + (rew(phi,a) - r_ext)^2.

    Returns (error, dyn_grads, rew_grads) where error is the loss at the
    current parameters, i.e. before any update is applied.
    """
    phi = np.asarray(phi, dtype=float)
    a = np.asarray(a, dtype=float)
    phi_next = np.asarray(phi_next, dtype=float)
    x = np.concatenate([phi, a])
    pred_next = nets.forward(model.dyn, x)
    pred_r = float(nets.forward(model.rew, x)[0])
    dyn_res = pred_next - phi_next
    rew_res = pred_r - float(r_ext)
    error = float(np.dot(dyn_res, dyn_res) + rew_res * rew_res)
    dyn_g = nets.backward(model.dyn, x, 2.0 * dyn_res)
    rew_g = nets.backward(model.rew, x, np.array([2.0 * rew_res]))
    return error, dyn_g, rew_g


def model_update(model: LocalModel, phi: np.ndarray, a: np.ndarray,
                 r_ext: float, phi_next: np.ndarray, lr: float) -> float:
    """One Adam step on a single transition; returns the pre-update error."""
    error, dyn_g, rew_g = model_grads(model, phi, a, r_ext, phi_next)
    nets.adam_step(model.dyn, dyn_g, model.dyn_adam, lr)
    nets.adam_step(model.rew, rew_g, model.rew_adam, lr)
    return error


# ----------------------------------------------------------------- rollouts

@dataclass
class RolloutTrace:
    """Model-generated trajectory: horizon+1 latents, horizon of the rest."""

    latents: list
    actions: list
    rewards: list
    nodes: list

    @property
    def horizon(self) -> int:
        return len(self.actions)


def unroll_proposal(itm: ItmMap, actor: nets.ParamSet, phi: np.ndarray,
                    max_depth: int) -> RolloutTrace:
    """Unroll the actor's proposal through node-local models.

    Each step matches the best node for the current latent, stops if its
    learning progress is undefined or negative, otherwise predicts one
    step ahead with that node's model.  The map is never adapted here;
    imagined latents must not grow it.  Raises ValueError if the very
    first node fails the gate, since arbitration should have routed the
    step to the model-free path instead.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    phi = np.asarray(phi, dtype=float)
    trace = RolloutTrace([phi], [], [], [])
    while trace.horizon < max_depth:
        ident = itm.nearest(trace.latents[-1])
        lp = itm.lp(ident)
        if lp is None or lp < 0.0:
            break
        node = itm.nodes[ident]
        if node.model is None:
            raise ValueError(f"node {ident} has no local model")
        a = nets.forward(actor, trace.latents[-1])
        phi_next, r_hat = model_predict(node.model, trace.latents[-1], a)
        trace.latents.append(phi_next)
        trace.actions.append(a)
        trace.rewards.append(r_hat)
        trace.nodes.append(ident)
    if trace.horizon == 0:
        raise ValueError("matched node has undefined or negative learning "
                         "progress; planning precondition violated")
    return trace


def planning_depth(itm: ItmMap, actor: nets.ParamSet, phi: np.ndarray,
                   max_depth: int) -> int:
    return unroll_proposal(itm, actor, phi, max_depth).horizon


def rollout_with_imagination(itm: ItmMap, actor: nets.ParamSet,
                             phi: np.ndarray, max_depth: int
                             ) -> tuple[RolloutTrace, list[LatentTransition]]:
    """Same traversal as planning_depth, also emitting imagined transitions.

    The proposed actions carry no exploration noise; noise is added only
    to the action finally executed in the environment.
    """
    trace = unroll_proposal(itm, actor, phi, max_depth)
    imagined = [
        LatentTransition(phi=trace.latents[h], a=trace.actions[h],
                         r=trace.rewards[h], phi_next=trace.latents[h + 1])
        for h in range(trace.horizon)
    ]
    return trace, imagined


# ----------------------------------------------------------------- planning

@dataclass
class PlanResult:
    actions: np.ndarray
    horizon: int
    final_loss: float
    loss_trace: list


def _unroll_fixed(models: list, phi0: np.ndarray, actions: np.ndarray):
    """Re-unroll over a frozen model sequence with the given actions."""
    latents = [phi0]
    rewards = []
    for model, a in zip(models, actions):
        phi_next, r_hat = model_predict(model, latents[-1], a)
        latents.append(phi_next)
        rewards.append(r_hat)
    return latents, rewards


def plan_optimize(itm: ItmMap, actor: nets.ParamSet, phi: np.ndarray,
                  target_return: float, lr: float, steps: int,
                  max_depth: int, trace: RolloutTrace | None = None
                  ) -> PlanResult:
    """Refine the actor's proposed actions by gradient descent.

    The loss is (target_return - sum of predicted rewards)^2.  The node
    sequence is frozen from the proposal rollout, so no model belonging
    to a node with negative learning progress is ever queried; only the
    latents are recomputed after each action update.  Actions are
    clipped to [-1, 1] after every step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not np.isfinite(target_return):
        raise ValueError("target_return must be finite")
    if trace is None:
        trace = unroll_proposal(itm, actor, phi, max_depth)
    for ident in trace.nodes:
        lp = itm.lp(ident)
        assert lp is not None and lp >= 0.0, \
            f"frozen plan visits node {ident} with learning progress {lp}"
    models = [itm.nodes[ident].model for ident in trace.nodes]
    phi0 = np.asarray(trace.latents[0], dtype=float)
    latent_dim = phi0.shape[0]
    actions = np.array(trace.actions, dtype=float)
    horizon = trace.horizon

    loss_trace = []
    try:
        for k in range(steps):
            latents, rewards = _unroll_fixed(models, phi0, actions)
            gap = target_return - float(np.sum(rewards))
            loss = gap * gap
            if not np.isfinite(loss):
                raise PlanningError(f"non-finite plan loss at step {k}")
            loss_trace.append(loss)
            dl_dr = -2.0 * gap
            grad = np.zeros_like(actions)
            g_phi = np.zeros(latent_dim)
            for h in reversed(range(horizon)):
                x = np.concatenate([latents[h], actions[h]])
                dyn_g = nets.backward(models[h].dyn, x, g_phi)
                rew_g = nets.backward(models[h].rew, x, np.array([dl_dr]))
                grad[h] = dyn_g.input_grad[latent_dim:] + rew_g.input_grad[latent_dim:]
                g_phi = dyn_g.input_grad[:latent_dim] + rew_g.input_grad[:latent_dim]
            actions = np.clip(actions - lr * grad, -1.0, 1.0)
    except nets.NonFiniteError as exc:
        raise PlanningError(f"non-finite quantity while planning: {exc}") from exc

    _, rewards = _unroll_fixed(models, phi0, actions)
    gap = target_return - float(np.sum(rewards))
    final_loss = gap * gap
    if not np.isfinite(final_loss):
        raise PlanningError("non-finite plan loss after final step")
    return PlanResult(actions=actions, horizon=horizon,
                      final_loss=final_loss, loss_trace=loss_trace)

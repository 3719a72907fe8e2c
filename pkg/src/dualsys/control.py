"""Model-free actor-critic layer: replay, targets, and the update rules.

Two actor updates are provided.  The deterministic-policy ascent pushes the
actor along the critic's action gradient; the advantage-gated regression
only pulls the actor toward executed actions that beat the critic's current
estimate (strictly positive advantage).  Both operate on latents supplied
by the perception module and never touch the encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets


@dataclass
class PixelTransition:
    s: np.ndarray
    a: np.ndarray
    r_total: float
    r_ext: float
    s_next: np.ndarray
    terminal: bool


@dataclass
class LatentTransition:
    phi: np.ndarray
    a: np.ndarray
    r: float
    phi_next: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring; uniform sampling with replacement."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._records = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._records)

    def store(self, record) -> None:
        if len(self._records) < self.capacity:
            self._records.append(record)
        else:
            self._records[self._cursor] = record
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, n: int, rng: np.random.Generator) -> list:
        if not self._records:
            raise ValueError("sampling from empty buffer")
        idx = rng.integers(0, len(self._records), size=n)
        return [self._records[i] for i in idx]

    def ordered(self) -> list:
        """Records oldest to newest."""
        return self._records[self._cursor:] + self._records[:self._cursor]


def stack_pixel(batch: list[PixelTransition]):
    s = np.stack([t.s for t in batch])
    a = np.stack([t.a for t in batch])
    r = np.array([t.r_total for t in batch], dtype=float)
    s2 = np.stack([t.s_next for t in batch])
    term = np.array([1.0 if t.terminal else 0.0 for t in batch])
    return s, a, r, s2, term


def stack_latent(batch: list[LatentTransition]):
    phi = np.stack([t.phi for t in batch])
    a = np.stack([t.a for t in batch])
    r = np.array([t.r for t in batch], dtype=float)
    phi2 = np.stack([t.phi_next for t in batch])
    return phi, a, r, phi2


@dataclass
class ActorCritic:
    critic: nets.ParamSet
    actor: nets.ParamSet
    critic_adam: nets.AdamState
    actor_adam: nets.AdamState

    @classmethod
    def build(cls, latent_dim: int, action_dim: int, critic_hidden: int,
              actor_hidden: int, rng: np.random.Generator) -> "ActorCritic":
        critic = nets.init_net([latent_dim + action_dim, critic_hidden, 1],
                               ["relu", "linear"], rng)
        actor = nets.init_net([latent_dim, actor_hidden, action_dim],
                              ["relu", "tanh"], rng)
        return cls(critic, actor,
                   nets.AdamState.for_params(critic), nets.AdamState.for_params(actor))


@dataclass
class TargetNets:
    enc: nets.ParamSet
    critic: nets.ParamSet
    actor: nets.ParamSet


def critic_target(targets: TargetNets, r: np.ndarray, phi_next: np.ndarray,
                  gamma: float, terminal: np.ndarray | None = None) -> np.ndarray:
    """y = r + gamma * Q'(phi', mu'(phi')), truncated to r at terminals."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    r = np.asarray(r, dtype=float)
    single = phi_next.ndim == 1
    p = phi_next[None, :] if single else phi_next
    a2 = nets.forward(targets.actor, p)
    q2 = nets.forward(targets.critic, np.concatenate([p, a2], axis=1))[:, 0]
    if terminal is None:
        y = r + gamma * (q2[0] if single else q2)
    else:
        mask = np.asarray(terminal, dtype=float)
        y = r + gamma * (q2[0] if single else q2) * (1.0 - mask)
    return y


def critic_grads(ac: ActorCritic, phi: np.ndarray, a: np.ndarray, y: np.ndarray):
    n = phi.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    x = np.concatenate([phi, a], axis=1)
    q = nets.forward(ac.critic, x)[:, 0]
    loss = float(np.mean((y - q) ** 2))
    g = (2.0 * (q - y) / n)[:, None]
    return loss, nets.backward(ac.critic, x, g)


def critic_update(ac: ActorCritic, phi: np.ndarray, a: np.ndarray,
                  y: np.ndarray, lr: float) -> float:
    loss, grads = critic_grads(ac, phi, a, y)
    nets.adam_step(ac.critic, grads, ac.critic_adam, lr)
    return loss


def ddpg_grads(ac: ActorCritic, phi: np.ndarray):
    """Loss -mean Q(phi, mu(phi)) and its gradient w.r.t. the actor only."""
    n = phi.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    mu = nets.forward(ac.actor, phi)
    x = np.concatenate([phi, mu], axis=1)
    q = nets.forward(ac.critic, x)[:, 0]
    loss = float(-np.mean(q))
    # dL/dQ = -1/n, chain through the critic's action input into the actor
    g_q = np.full((n, 1), -1.0 / n)
    crit_back = nets.backward(ac.critic, x, g_q)
    g_action = crit_back.input_grad[:, phi.shape[1]:]
    actor_g = nets.backward(ac.actor, phi, g_action)
    return loss, actor_g


def ddpg_actor_update(ac: ActorCritic, phi: np.ndarray, lr: float) -> float:
    loss, grads = ddpg_grads(ac, phi)
    nets.adam_step(ac.actor, grads, ac.actor_adam, lr)
    return loss


def cacla_grads(ac: ActorCritic, phi: np.ndarray, a: np.ndarray, delta: np.ndarray):
    """Advantage-gated regression toward executed actions.

    Averages |a - mu(phi)|^2 over the transitions with delta > 0; returns
    (loss, grads, n_selected) with grads None when nothing passes the gate.
    """
    delta = np.asarray(delta, dtype=float)
    sel = delta > 0.0
    k = int(np.count_nonzero(sel))
    if k == 0:
        return 0.0, None, 0
    phi_s = phi[sel]
    a_s = a[sel]
    mu = nets.forward(ac.actor, phi_s)
    loss = float(np.mean(np.sum((a_s - mu) ** 2, axis=1)))
    g = 2.0 * (mu - a_s) / k
    return loss, nets.backward(ac.actor, phi_s, g), k


def cacla_actor_update(ac: ActorCritic, phi: np.ndarray, a: np.ndarray,
                       delta: np.ndarray, lr: float) -> float:
    loss, grads, k = cacla_grads(ac, phi, a, delta)
    if k:
        nets.adam_step(ac.actor, grads, ac.actor_adam, lr)
    return loss


def act_with_noise(actor: nets.ParamSet, phi: np.ndarray, noise_scale: float,
                   rng: np.random.Generator) -> np.ndarray:
    if noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    a = nets.forward(actor, phi)
    if noise_scale:
        a = a + noise_scale * rng.standard_normal(a.shape)
    return np.clip(a, -1.0, 1.0)

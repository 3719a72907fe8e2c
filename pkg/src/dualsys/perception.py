"""Latent perception: autoencoder trained jointly with the critic.

The encoder is the single pathway from observations to latents; the critic,
actor, map, and world models all consume its output.  Training couples a
reconstruction term with the critic's TD loss so the latent code keeps both
appearance and value information:

    L = rec_weight * |g(f(s)) - s|^2 + value_weight * (y - Q(f(s), a))^2

averaged over a minibatch.  In joint mode the critic moves too; in
encoder_only mode the TD gradient still shapes the encoder but the critic
parameters are held fixed.

align_encoders adapts a trained encoder so that paired renders of the same
state from two renderers (nominal and shifted) map to nearby latents.  The
pair objective is  0.5 * |f(s_a) - f(s_b)|^2 ; descending it symmetrically
would drag both embeddings toward a midpoint, leaving downstream consumers
of the nominal latents (critic, actor, map) reading inputs they were never
trained on.  Training therefore anchors: the nominal embeddings are frozen
as regression targets before any update, and both renders are pulled onto
them.  The pair distance collapses just the same, but the latent code the
policy already understands stays put.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets

PAIRS_MAGIC = "dualsys-pairs"
PAIRS_VERSION = 1


@dataclass
class Autoencoder:
    enc: nets.ParamSet
    dec: nets.ParamSet
    enc_adam: nets.AdamState
    dec_adam: nets.AdamState

    @classmethod
    def build(cls, obs_dim: int, hidden: int, latent_dim: int,
              rng: np.random.Generator) -> "Autoencoder":
        enc = nets.init_net([obs_dim, hidden, latent_dim], ["relu", "linear"], rng)
        dec = nets.init_net([latent_dim, hidden, obs_dim], ["relu", "linear"], rng)
        return cls(enc, dec, nets.AdamState.for_params(enc), nets.AdamState.for_params(dec))

    def encode(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != self.enc.in_dim:
            raise ValueError(f"observation dim {s.shape[-1]} != {self.enc.in_dim}")
        return nets.forward(self.enc, s)

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dec.in_dim:
            raise ValueError(f"latent dim {z.shape[-1]} != {self.dec.in_dim}")
        return nets.forward(self.dec, z)


def combined_grads(auto: Autoencoder, critic: nets.ParamSet,
                   target_enc: nets.ParamSet, target_critic: nets.ParamSet,
                   target_actor: nets.ParamSet,
                   s: np.ndarray, a: np.ndarray, r: np.ndarray,
                   s_next: np.ndarray, terminal: np.ndarray,
                   rec_weight: float, value_weight: float, gamma: float):
    """Loss and exact gradients of the combined objective on one minibatch.

    Returns (loss, enc_grads, dec_grads, critic_grads, phi, y).  phi are the
    current-encoder latents for the batch (reusable by the actor step) and y
    the target values (constants w.r.t. every trained parameter here).
    """
    n = s.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    latent_dim = auto.enc.out_dim

    # target side: y = r + gamma * Q'(f'(s_next), mu'(f'(s_next))), r at terminals
    phi_next = nets.forward(target_enc, s_next)
    a_next = nets.forward(target_actor, phi_next)
    q_next = nets.forward(target_critic, np.concatenate([phi_next, a_next], axis=1))[:, 0]
    y = r + gamma * q_next * (1.0 - terminal)

    phi = nets.forward(auto.enc, s)
    recon = nets.forward(auto.dec, phi)
    q = nets.forward(critic, np.concatenate([phi, a], axis=1))[:, 0]

    rec_loss = float(np.mean(np.sum((recon - s) ** 2, axis=1)))
    q_loss = float(np.mean((y - q) ** 2))
    loss = rec_weight * rec_loss + value_weight * q_loss

    g_recon = rec_weight * 2.0 * (recon - s) / n
    dec_g = nets.backward(auto.dec, phi, g_recon)

    g_q = (value_weight * 2.0 * (q - y) / n)[:, None]
    crit_g = nets.backward(critic, np.concatenate([phi, a], axis=1), g_q)

    g_phi = dec_g.input_grad + crit_g.input_grad[:, :latent_dim]
    enc_g = nets.backward(auto.enc, s, g_phi)
    return loss, enc_g, dec_g, crit_g, phi, y


def combined_update(auto: Autoencoder, critic: nets.ParamSet,
                    critic_adam: nets.AdamState,
                    target_enc: nets.ParamSet, target_critic: nets.ParamSet,
                    target_actor: nets.ParamSet,
                    s: np.ndarray, a: np.ndarray, r: np.ndarray,
                    s_next: np.ndarray, terminal: np.ndarray, *,
                    rec_weight: float, value_weight: float, gamma: float,
                    lr: float, mode: str = "joint"):
    """One Adam step on the combined loss; returns (loss, phi, y)."""
    if mode not in ("joint", "encoder_only"):
        raise ValueError(f"unknown mode {mode!r}")
    loss, enc_g, dec_g, crit_g, phi, y = combined_grads(
        auto, critic, target_enc, target_critic, target_actor,
        s, a, r, s_next, terminal, rec_weight, value_weight, gamma)
    nets.adam_step(auto.enc, enc_g, auto.enc_adam, lr)
    nets.adam_step(auto.dec, dec_g, auto.dec_adam, lr)
    if mode == "joint":
        nets.adam_step(critic, crit_g, critic_adam, lr)
    return loss, phi, y


# ------------------------------------------------------------------ alignment

def mean_pair_distance(auto: Autoencoder, sim: np.ndarray, real: np.ndarray) -> float:
    d = auto.encode(sim) - auto.encode(real)
    return float(np.mean(np.sqrt(np.sum(d ** 2, axis=1))))


def align_grads(enc: nets.ParamSet, sim: np.ndarray, real: np.ndarray):
    """Gradient of mean 0.5*|f(sim) - f(real)|^2; flows through both encodings."""
    n = sim.shape[0]
    phi_sim = nets.forward(enc, sim)
    phi_real = nets.forward(enc, real)
    diff = phi_sim - phi_real
    loss = float(np.mean(0.5 * np.sum(diff ** 2, axis=1)))
    g = diff / n
    grads = nets.add_grads(nets.backward(enc, sim, g),
                           nets.backward(enc, real, -g))
    return loss, grads


def anchor_grads(enc: nets.ParamSet, obs: np.ndarray, targets: np.ndarray):
    """Gradient of mean 0.5*|f(obs) - targets|^2 with fixed latent targets."""
    n = obs.shape[0]
    phi = nets.forward(enc, obs)
    diff = phi - targets
    loss = float(np.mean(0.5 * np.sum(diff ** 2, axis=1)))
    grads = nets.backward(enc, obs, diff / n)
    return loss, grads


def align_encoders(auto: Autoencoder, sim: np.ndarray, real: np.ndarray, *,
                   epochs: int = 200, batch: int = 512, lr: float = 1e-3,
                   rng: np.random.Generator) -> list[float]:
    """Fit the encoder so paired renders coincide in latent space.

    The nominal embeddings f(sim) are snapshotted before training and both
    renders are regressed onto them with minibatch Adam, so the pair distance
    collapses without moving the latent region the rest of the agent was
    trained against.  Returns the mean per-epoch anchored loss history.
    Mutates auto.enc in place.
    """
    sim = np.asarray(sim, dtype=float)
    real = np.asarray(real, dtype=float)
    if sim.shape != real.shape or sim.ndim != 2:
        raise ValueError("pair arrays must be matching 2-d blocks")
    n = sim.shape[0]
    if n == 0:
        raise ValueError("empty pair set")
    anchors = nets.forward(auto.enc, sim)
    state = nets.AdamState.for_params(auto.enc)
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, batch):
            idx = order[lo:lo + batch]
            xs = np.concatenate([sim[idx], real[idx]])
            ts = np.concatenate([anchors[idx], anchors[idx]])
            loss, grads = anchor_grads(auto.enc, xs, ts)
            nets.adam_step(auto.enc, grads, state, lr)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return history


# ------------------------------------------------------------------ pair files

def dump_pairs(sim: np.ndarray, real: np.ndarray) -> str:
    """Interleaved text block of paired observation records."""
    sim = np.asarray(sim, dtype=float)
    real = np.asarray(real, dtype=float)
    if sim.shape != real.shape:
        raise ValueError("pair arrays must match")
    lines = [f"{PAIRS_MAGIC} {PAIRS_VERSION}",
             f"count {sim.shape[0]} dim {sim.shape[1]}"]
    for a, b in zip(sim, real):
        lines.append(" ".join(repr(float(v)) for v in a))
        lines.append(" ".join(repr(float(v)) for v in b))
    return "\n".join(lines) + "\n"


def load_pairs(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != PAIRS_MAGIC or int(head[1]) != PAIRS_VERSION:
        raise ValueError("not a recognized pair dataset")
    _, count, _, dim = lines[1].split()
    count, dim = int(count), int(dim)
    sim = np.array([[float(v) for v in lines[2 + 2 * i].split()] for i in range(count)])
    real = np.array([[float(v) for v in lines[3 + 2 * i].split()] for i in range(count)])
    if sim.shape != (count, dim) or real.shape != (count, dim):
        raise ValueError("corrupt pair dataset")
    return sim, real


def save_pairs(sim: np.ndarray, real: np.ndarray, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(dump_pairs(sim, real))


def load_pairs_file(path: str):
    with open(path) as fh:
        return load_pairs(fh.read())

"""Minimal dense feedforward networks with exact reverse-mode gradients.

Everything downstream (autoencoder, critic, actor, per-region world models)
is a short stack of affine layers with tanh / relu / linear activations, so
this module implements exactly that and nothing else: forward evaluation,
reverse-mode gradients w.r.t. parameters and inputs, Adam, Polyak blending
for target networks, and a finite-difference self check.  All math is
float64 numpy and fully deterministic given a seeded Generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "relu", "linear")

SNAPSHOT_MAGIC = "dualsys-net"
SNAPSHOT_VERSION = 1


class NonFiniteError(RuntimeError):
    """Raised when a forward or backward pass produces NaN or Inf."""


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    act: str

    def __post_init__(self) -> None:
        if self.act not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.act!r}")
        self.w = np.asarray(self.w, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ValueError("layer shape mismatch")


@dataclass
class ParamSet:
    layers: list[Layer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[0]


@dataclass
class GradientBundle:
    """Per-layer (dW, db) pairs plus the gradient w.r.t. the network input."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    input_grad: np.ndarray


def init_net(dims: list[int], acts: list[str], rng: np.random.Generator) -> ParamSet:
    """Build a net with layer sizes dims[0] -> dims[1] -> ... and given activations.

    Weights and biases are uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    """
    if len(acts) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], acts):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=(fan_out,))
        layers.append(Layer(w, b, act))
    return ParamSet(layers)


def clone_params(net: ParamSet) -> ParamSet:
    return ParamSet([Layer(l.w.copy(), l.b.copy(), l.act) for l in net.layers])


def params_vector(net: ParamSet) -> np.ndarray:
    """Flatten all parameters into one vector (row-major, weights then bias per layer)."""
    parts = []
    for l in net.layers:
        parts.append(l.w.ravel())
        parts.append(l.b.ravel())
    return np.concatenate(parts)


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    if act == "tanh":
        return np.tanh(z)
    if act == "relu":
        return np.maximum(z, 0.0)
    return z


def forward(net: ParamSet, x: np.ndarray) -> np.ndarray:
    """Evaluate the net on a single vector (1-d) or a batch (2-d, row per sample)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[-1] != net.in_dim:
        raise ValueError(f"input dim {h.shape[-1]} != expected {net.in_dim}")
    for layer in net.layers:
        h = _activate(h @ layer.w.T + layer.b, layer.act)
    return h[0] if single else h


def backward(net: ParamSet, x: np.ndarray, output_grad: np.ndarray) -> GradientBundle:
    """Exact gradients of (output_grad . output) w.r.t. parameters and input.

    For batched inputs the parameter gradients are summed over the batch,
    so mean losses should fold the 1/n factor into output_grad.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(output_grad, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if single:
        g = g[None, :]
    if h.shape[-1] != net.in_dim:
        raise ValueError(f"input dim {h.shape[-1]} != expected {net.in_dim}")
    if g.shape != (h.shape[0], net.out_dim):
        raise ValueError("output_grad shape mismatch")

    inputs = [h]  # activations entering each layer
    pres = []
    for layer in net.layers:
        z = h @ layer.w.T + layer.b
        pres.append(z)
        h = _activate(z, layer.act)
        inputs.append(h)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        if layer.act == "tanh":
            gz = g * (1.0 - inputs[i + 1] ** 2)
        elif layer.act == "relu":
            gz = g * (pres[i] > 0.0)
        else:
            gz = g
        grads[i] = (gz.T @ inputs[i], gz.sum(axis=0))
        g = gz @ layer.w

    # One aggregated check; NaN/Inf propagate through the sums.
    probe = g.sum() + sum(dw.sum() + db.sum() for dw, db in grads)
    if not np.isfinite(probe):
        raise NonFiniteError("non-finite gradient in backward pass")
    return GradientBundle(grads, g[0] if single else g)


def add_grads(a: GradientBundle, b: GradientBundle) -> GradientBundle:
    layers = [(dw1 + dw2, db1 + db2) for (dw1, db1), (dw2, db2) in zip(a.layers, b.layers)]
    return GradientBundle(layers, a.input_grad + b.input_grad)


def zero_grads(net: ParamSet) -> GradientBundle:
    layers = [(np.zeros_like(l.w), np.zeros_like(l.b)) for l in net.layers]
    return GradientBundle(layers, np.zeros(net.in_dim))


@dataclass
class AdamState:
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, net: ParamSet, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        m = [(np.zeros_like(l.w), np.zeros_like(l.b)) for l in net.layers]
        v = [(np.zeros_like(l.w), np.zeros_like(l.b)) for l in net.layers]
        return cls(m, v, 0, beta1, beta2, eps)


def adam_step(net: ParamSet, grads: GradientBundle, state: AdamState, lr: float) -> None:
    """One Adam update with bias correction, in place."""
    state.t += 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for layer, (dw, db), (mw, mb), (vw, vb) in zip(net.layers, grads.layers, state.m, state.v):
        for p, gr, mo, ve in ((layer.w, dw, mw, vw), (layer.b, db, mb, vb)):
            mo *= b1
            mo += (1.0 - b1) * gr
            ve *= b2
            ve += (1.0 - b2) * gr * gr
            p -= lr * (mo / c1) / (np.sqrt(ve / c2) + eps)


def soft_update(target: ParamSet, source: ParamSet, tau: float) -> None:
    """Blend target towards source in place: target = tau*source + (1-tau)*target."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    for tl, sl in zip(target.layers, source.layers):
        if tl.w.shape != sl.w.shape:
            raise ValueError("parameter shape mismatch in soft_update")
        tl.w[...] = tau * sl.w + (1.0 - tau) * tl.w
        tl.b[...] = tau * sl.b + (1.0 - tau) * tl.b


def finite_diff_check(net: ParamSet, x: np.ndarray, loss, loss_grad,
                      step: float = 1e-5) -> float:
    """Compare analytic parameter gradients against central finite differences.

    loss maps a network output vector to a scalar; loss_grad gives its exact
    gradient w.r.t. that output.  Returns the maximum relative error over all
    parameters, with denominator max(|analytic|, |numeric|, 1e-8).
    """
    y = forward(net, x)
    analytic = backward(net, x, np.asarray(loss_grad(y), dtype=float))
    worst = 0.0
    for layer, (dw, db) in zip(net.layers, analytic.layers):
        for arr, grad in ((layer.w, dw), (layer.b, db)):
            flat = arr.ravel()
            gflat = grad.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                f_plus = float(loss(forward(net, x)))
                flat[i] = orig - step
                f_minus = float(loss(forward(net, x)))
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2.0 * step)
                denom = max(abs(gflat[i]), abs(numeric), 1e-8)
                worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


def _fmt(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def dump_params(net: ParamSet) -> str:
    """Serialize to the flat text snapshot format (layer dims + row-major values)."""
    lines = [f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}", f"layers {len(net.layers)}"]
    for l in net.layers:
        out_dim, in_dim = l.w.shape
        lines.append(f"layer {out_dim} {in_dim} {l.act}")
        for row in l.w:
            lines.append(_fmt(row))
        lines.append(_fmt(l.b))
    return "\n".join(lines) + "\n"


def load_params(text: str) -> ParamSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != SNAPSHOT_MAGIC or int(head[1]) != SNAPSHOT_VERSION:
        raise ValueError("not a recognized network snapshot")
    n_layers = int(lines[1].split()[1])
    pos = 2
    layers = []
    for _ in range(n_layers):
        _, out_s, in_s, act = lines[pos].split()
        out_dim, in_dim = int(out_s), int(in_s)
        pos += 1
        w = np.array([[float(v) for v in lines[pos + r].split()] for r in range(out_dim)])
        pos += out_dim
        b = np.array([float(v) for v in lines[pos].split()])
        pos += 1
        if w.shape != (out_dim, in_dim) or b.shape != (out_dim,):
            raise ValueError("corrupt snapshot: shape mismatch")
        layers.append(Layer(w, b, act))
    return ParamSet(layers)


def save_params(net: ParamSet, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(dump_params(net))


def load_params_file(path: str) -> ParamSet:
    with open(path) as fh:
        return load_params(fh.read())

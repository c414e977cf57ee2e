"""Two-layer MLPs with hand-written backward passes.

Actor: linear -> ReLU -> linear producing concatenated head logits
(subchannel head first, power head second).  Critic: linear -> LayerNorm ->
ReLU -> linear producing a scalar.  Gradients are exact; tests compare them
against central finite differences, which is the reason everything stays in
float64 and the LayerNorm backward is written out rather than approximated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LN_EPS = 1e-5


@dataclass
class MlpParams:
    """Weights of one two-layer network.  ``ln_*`` present iff layer_norm."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    layer_norm: bool = False
    ln_gain: np.ndarray | None = None
    ln_bias: np.ndarray | None = None

    def tensors(self) -> dict[str, np.ndarray]:
        out = {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}
        if self.layer_norm:
            out["ln_gain"] = self.ln_gain
            out["ln_bias"] = self.ln_bias
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            w1=self.w1.copy(), b1=self.b1.copy(),
            w2=self.w2.copy(), b2=self.b2.copy(),
            layer_norm=self.layer_norm,
            ln_gain=None if self.ln_gain is None else self.ln_gain.copy(),
            ln_bias=None if self.ln_bias is None else self.ln_bias.copy(),
        )


def orthogonal(rows: int, cols: int, gain: float, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal-style init: QR of a Gaussian draw, sign-fixed, scaled by gain."""
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_actor(in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator) -> MlpParams:
    """Hidden layer at gain sqrt(2); logits layer at 0.01 so heads start near uniform."""
    return MlpParams(
        w1=orthogonal(in_dim, hidden, np.sqrt(2.0), rng),
        b1=np.zeros(hidden),
        w2=orthogonal(hidden, out_dim, 0.01, rng),
        b2=np.zeros(out_dim),
    )


def init_critic(in_dim: int, hidden: int, rng: np.random.Generator) -> MlpParams:
    return MlpParams(
        w1=orthogonal(in_dim, hidden, np.sqrt(2.0), rng),
        b1=np.zeros(hidden),
        w2=orthogonal(hidden, 1, 1.0, rng),
        b2=np.zeros(1),
        layer_norm=True,
        ln_gain=np.ones(hidden),
        ln_bias=np.zeros(hidden),
    )


def zero_like_params(p: MlpParams) -> MlpParams:
    """Same shapes, all zeros: logits identically zero means uniform heads."""
    out = p.copy()
    for t in out.tensors().values():
        t[...] = 0.0
    return out


# --------------------------------------------------------------------- actor

def actor_forward(p: MlpParams, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Logits (B, out) plus the cache needed for the backward pass."""
    z1 = x @ p.w1 + p.b1
    h = np.maximum(z1, 0.0)
    logits = h @ p.w2 + p.b2
    return logits, {"x": x, "z1": z1, "h": h}


def actor_backward(p: MlpParams, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given d(loss)/d(logits)."""
    h = cache["h"]
    dw2 = h.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dh = dlogits @ p.w2.T
    dz1 = dh * (cache["z1"] > 0.0)
    dw1 = cache["x"].T @ dz1
    db1 = dz1.sum(axis=0)
    return {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


# -------------------------------------------------------------------- critic

def critic_forward(p: MlpParams, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Scalar values (B,) plus backward cache."""
    z1 = x @ p.w1 + p.b1
    mu = z1.mean(axis=1, keepdims=True)
    var = z1.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (z1 - mu) * inv_std
    ln = p.ln_gain * xhat + p.ln_bias
    h = np.maximum(ln, 0.0)
    v = (h @ p.w2 + p.b2).reshape(-1)
    return v, {"x": x, "z1": z1, "xhat": xhat, "inv_std": inv_std, "ln": ln, "h": h}


def critic_backward(p: MlpParams, cache: dict, dv: np.ndarray) -> dict[str, np.ndarray]:
    h = cache["h"]
    dv2 = dv.reshape(-1, 1)
    dw2 = h.T @ dv2
    db2 = dv2.sum(axis=0)
    dh = dv2 @ p.w2.T
    dln = dh * (cache["ln"] > 0.0)
    xhat = cache["xhat"]
    dgain = (dln * xhat).sum(axis=0)
    dbias = dln.sum(axis=0)
    dxhat = dln * p.ln_gain
    # LayerNorm backward over the feature axis.
    mean_dxhat = dxhat.mean(axis=1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=1, keepdims=True)
    dz1 = cache["inv_std"] * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    dw1 = cache["x"].T @ dz1
    db1 = dz1.sum(axis=0)
    return {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2,
            "ln_gain": dgain, "ln_bias": dbias}


# ------------------------------------------------------------- distributions

def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def categorical_entropy(logp: np.ndarray) -> np.ndarray:
    """Entropy per row from log-probabilities."""
    return -(np.exp(logp) * logp).sum(axis=-1)


def sample_categorical(logp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row via inverse-CDF on the probability simplex."""
    cdf = np.cumsum(np.exp(logp), axis=-1)
    u = rng.random(size=logp.shape[:-1] + (1,))
    return (cdf > u).argmax(axis=-1)


# ---------------------------------------------------------------- optimizer

@dataclass
class AdamOptimizer:
    """Adam over a named tensor dict; state keyed by tensor name."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, w in tensors.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(w)
                self.v[name] = np.zeros_like(w)
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            w -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def global_grad_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))


def clip_grads_(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale grads in place to the given global norm; returns the pre-clip norm."""
    norm = global_grad_norm(grads)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm

"""Minimal numpy building blocks with hand-written gradients.

Everything runs in float64 so finite-difference checks are meaningful; the
desk-scale widths keep that affordable.
"""

from __future__ import annotations

import numpy as np


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def bce_with_logits(
    logits: np.ndarray, y: np.ndarray, pos_weight: float = 1.0
) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy with optional positive-class weighting.

    Returns (loss, dloss/dlogits).  ``pos_weight`` > 1 counterweights class
    imbalance (the malicious class is ~10% of realistic training sets).
    """
    n = logits.shape[0]
    weight = 1.0 + (pos_weight - 1.0) * y
    loss = float(np.mean((1.0 - y) * logits + weight * softplus(-logits)))
    dlogits = ((1.0 - y) - weight * (1.0 - sigmoid(logits))) / n
    return loss, dlogits


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            p = self.params[k]
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * (g * g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


class MLPBlock:
    """Dense stack with ReLU between layers; ``final_relu`` applies it after the last too.

    Parameters register into a shared dict under ``{name}.W{i}`` / ``{name}.b{i}``.
    """

    def __init__(
        self,
        name: str,
        widths: list[int],
        rng: np.random.Generator,
        params: dict[str, np.ndarray],
        final_relu: bool = False,
    ):
        self.name = name
        self.widths = list(widths)
        self.final_relu = final_relu
        self.n_layers = len(widths) - 1
        for i in range(self.n_layers):
            params[f"{name}.W{i}"] = glorot(rng, widths[i], widths[i + 1])
            params[f"{name}.b{i}"] = np.zeros(widths[i + 1])
        self.params = params

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        cache = []
        h = x
        for i in range(self.n_layers):
            pre = h @ self.params[f"{self.name}.W{i}"] + self.params[f"{self.name}.b{i}"]
            cache.append((h, pre))
            if i < self.n_layers - 1 or self.final_relu:
                h = np.maximum(pre, 0.0)
            else:
                h = pre
        return h, cache

    def backward(self, dout: np.ndarray, cache: list, grads: dict[str, np.ndarray]) -> np.ndarray:
        dh = dout
        for i in reversed(range(self.n_layers)):
            h_in, pre = cache[i]
            if i < self.n_layers - 1 or self.final_relu:
                dpre = dh * (pre > 0)
            else:
                dpre = dh
            w_key, b_key = f"{self.name}.W{i}", f"{self.name}.b{i}"
            grads[w_key] = grads.get(w_key, 0) + h_in.T @ dpre
            grads[b_key] = grads.get(b_key, 0) + dpre.sum(axis=0)
            dh = dpre @ self.params[w_key].T
        return dh


def softmax_rows(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_backward(softmax_out: np.ndarray, dout: np.ndarray) -> np.ndarray:
    dot = np.sum(dout * softmax_out, axis=1, keepdims=True)
    return softmax_out * (dout - dot)


def snapshot(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def restore(params: dict[str, np.ndarray], saved: dict[str, np.ndarray]) -> None:
    for k, v in saved.items():
        params[k][...] = v

"""Small numpy layers with explicit backward passes, plus Adam.

Layers are stateless: parameters live in a flat ``dict[str, ndarray]`` owned
by the model, and each ``forward`` returns a cache consumed by ``backward``.
Sequence tensors are channels-last, (batch, length, channels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def relu(x):
    return np.maximum(x, 0.0)


@dataclass(frozen=True)
class Conv1d:
    """Strided 1-D convolution; weight shape (k, c_in, c_out)."""

    c_in: int
    c_out: int
    k: int
    stride: int = 1
    pad: int = 0

    def init(self, rng, prefix: str) -> dict:
        fan_in = self.c_in * self.k
        return {
            f"{prefix}.w": uniform_init(rng, (self.k, self.c_in, self.c_out), fan_in),
            f"{prefix}.b": uniform_init(rng, (self.c_out,), fan_in),
        }

    def out_len(self, n: int) -> int:
        return (n + 2 * self.pad - self.k) // self.stride + 1

    def forward(self, params, prefix, x):
        w, b = params[f"{prefix}.w"], params[f"{prefix}.b"]
        B, L, _ = x.shape
        xp = np.pad(x, ((0, 0), (self.pad, self.pad), (0, 0))) if self.pad else x
        lout = self.out_len(L)
        # (B, L', C, k) -> (B, L_out, k * C)
        win = sliding_window_view(xp, self.k, axis=1)[:, :: self.stride][:, :lout]
        cols = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(B, lout, self.k * self.c_in)
        y = cols @ w.reshape(self.k * self.c_in, self.c_out) + b
        return y, (cols, L)

    def backward(self, params, prefix, dy, cache):
        w = params[f"{prefix}.w"]
        cols, L = cache
        B, lout, _ = dy.shape
        wmat = w.reshape(self.k * self.c_in, self.c_out)
        grads = {
            f"{prefix}.w": (cols.reshape(-1, cols.shape[-1]).T @ dy.reshape(-1, self.c_out)).reshape(w.shape),
            f"{prefix}.b": dy.sum(axis=(0, 1)),
        }
        dcols = (dy @ wmat.T).reshape(B, lout, self.k, self.c_in)
        dxp = np.zeros((B, L + 2 * self.pad, self.c_in))
        span = self.stride * (lout - 1) + 1
        for j in range(self.k):
            dxp[:, j : j + span : self.stride] += dcols[:, :, j]
        dx = dxp[:, self.pad : self.pad + L] if self.pad else dxp
        return dx, grads


@dataclass(frozen=True)
class ConvTranspose1d:
    """Adjoint of :class:`Conv1d` in shape; weight shape (c_in, k, c_out)."""

    c_in: int
    c_out: int
    k: int
    stride: int = 1
    pad: int = 0

    def init(self, rng, prefix: str) -> dict:
        fan_in = max(1, self.c_in * self.k // self.stride)
        return {
            f"{prefix}.w": uniform_init(rng, (self.c_in, self.k, self.c_out), fan_in),
            f"{prefix}.b": uniform_init(rng, (self.c_out,), fan_in),
        }

    def out_len(self, n: int) -> int:
        return (n - 1) * self.stride + self.k - 2 * self.pad

    def forward(self, params, prefix, x):
        w, b = params[f"{prefix}.w"], params[f"{prefix}.b"]
        B, lin, _ = x.shape
        z = (x @ w.reshape(self.c_in, self.k * self.c_out)).reshape(B, lin, self.k, self.c_out)
        full = np.zeros((B, (lin - 1) * self.stride + self.k, self.c_out))
        span = self.stride * (lin - 1) + 1
        for j in range(self.k):
            full[:, j : j + span : self.stride] += z[:, :, j]
        lout = self.out_len(lin)
        y = full[:, self.pad : self.pad + lout] + b
        return y, (x,)

    def backward(self, params, prefix, dy, cache):
        w = params[f"{prefix}.w"]
        (x,) = cache
        B, lin, _ = x.shape
        full = np.zeros((B, (lin - 1) * self.stride + self.k, self.c_out))
        full[:, self.pad : self.pad + dy.shape[1]] = dy
        span = self.stride * (lin - 1) + 1
        dz = np.empty((B, lin, self.k, self.c_out))
        for j in range(self.k):
            dz[:, :, j] = full[:, j : j + span : self.stride]
        dz = dz.reshape(B, lin, self.k * self.c_out)
        wmat = w.reshape(self.c_in, self.k * self.c_out)
        grads = {
            f"{prefix}.w": (x.reshape(-1, self.c_in).T @ dz.reshape(-1, dz.shape[-1])).reshape(w.shape),
            f"{prefix}.b": dy.sum(axis=(0, 1)),
        }
        return dz @ wmat.T, grads


class Adam:
    def __init__(self, params: dict, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            self.params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def softmax(a, axis=-1):
    a = a - a.max(axis=axis, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=axis, keepdims=True)


def minibatches(rng, n: int, batch_size: int):
    order = rng.permutation(n)
    for lo in range(0, n, batch_size):
        yield order[lo : lo + batch_size]

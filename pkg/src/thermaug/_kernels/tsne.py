"""Exact t-SNE kernels: per-row bandwidth search and the KL gradient.

The bandwidth search bisects on log(beta), beta = 1 / (2 sigma^2), until the
row entropy (nats) matches log(perplexity) to ``tol``.
"""

from __future__ import annotations

import numpy as np

from .._accel import USE_NUMBA, njit

LOG_BETA_LO = -100.0
LOG_BETA_HI = 100.0
MAX_ITER = 200


def _row_entropy_numpy(d, beta):
    # d: (m, m-1) off-diagonal distances shifted so each row's minimum is 0
    p = np.exp(-d * beta[:, None])
    s = p.sum(axis=1)
    h = np.log(s) + beta * (d * p).sum(axis=1) / s
    return h, p / s[:, None]


def conditional_p_numpy(d2, perplexity, tol):
    """Row-conditional affinities P[j|i] from squared distances ``d2``."""
    m = d2.shape[0]
    off = ~np.eye(m, dtype=bool)
    d = d2[off].reshape(m, m - 1)
    d = d - d.min(axis=1, keepdims=True)
    target = np.log(perplexity)
    lo = np.full(m, LOG_BETA_LO)
    hi = np.full(m, LOG_BETA_HI)
    mid = np.zeros(m)
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        h, p = _row_entropy_numpy(d, np.exp(mid))
        err = h - target
        if np.all(np.abs(err) < tol):
            break
        # entropy falls as beta grows
        too_flat = err > 0
        lo = np.where(too_flat, mid, lo)
        hi = np.where(too_flat, hi, mid)
    _, p = _row_entropy_numpy(d, np.exp(mid))
    out = np.zeros((m, m))
    out[off] = p.ravel()
    return out, np.exp(mid)


@njit
def conditional_p_numba(d2, perplexity, tol):
    m = d2.shape[0]
    out = np.zeros((m, m))
    betas = np.empty(m)
    target = np.log(perplexity)
    row = np.empty(m)
    for i in range(m):
        dmin = np.inf
        for j in range(m):
            if j != i and d2[i, j] < dmin:
                dmin = d2[i, j]
        lo = LOG_BETA_LO
        hi = LOG_BETA_HI
        mid = 0.0
        for _ in range(MAX_ITER):
            mid = 0.5 * (lo + hi)
            beta = np.exp(mid)
            s = 0.0
            sd = 0.0
            for j in range(m):
                if j == i:
                    row[j] = 0.0
                    continue
                dj = d2[i, j] - dmin
                pj = np.exp(-dj * beta)
                row[j] = pj
                s += pj
                sd += dj * pj
            h = np.log(s) + beta * sd / s
            err = h - target
            if abs(err) < tol:
                break
            if err > 0:
                lo = mid
            else:
                hi = mid
        beta = np.exp(mid)
        s = 0.0
        for j in range(m):
            if j == i:
                row[j] = 0.0
            else:
                row[j] = np.exp(-(d2[i, j] - dmin) * beta)
                s += row[j]
        for j in range(m):
            out[i, j] = row[j] / s
        betas[i] = beta
    return out, betas


def kl_gradient_numpy(y, p):
    sq = (y * y).sum(axis=1)
    num = 1.0 / (1.0 + sq[:, None] + sq[None, :] - 2.0 * y @ y.T)
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), 1e-300)
    w = (p - q) * num
    grad = 4.0 * (w.sum(axis=1)[:, None] * y - w @ y)
    mask = p > 0
    kl = float((p[mask] * np.log(p[mask] / q[mask])).sum())
    return grad, kl


@njit
def kl_gradient_numba(y, p):
    m, k = y.shape
    num = np.zeros((m, m))
    z = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            s = 0.0
            for c in range(k):
                r = y[i, c] - y[j, c]
                s += r * r
            v = 1.0 / (1.0 + s)
            num[i, j] = v
            num[j, i] = v
            z += 2.0 * v
    grad = np.zeros((m, k))
    kl = 0.0
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            q = max(num[i, j] / z, 1e-300)
            w = (p[i, j] - q) * num[i, j]
            for c in range(k):
                grad[i, c] += 4.0 * w * (y[i, c] - y[j, c])
            if p[i, j] > 0:
                kl += p[i, j] * np.log(p[i, j] / q)
    return grad, kl


if USE_NUMBA:
    conditional_p = conditional_p_numba
    kl_gradient = kl_gradient_numba
else:
    conditional_p = conditional_p_numpy
    kl_gradient = kl_gradient_numpy

"""Distribution diagnostics for real vs synthetic series: PCA and exact t-SNE."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._kernels.tsne import conditional_p, kl_gradient
from .errors import PerplexityTooLarge, RankDeficient

TSNE_MAX_POINTS = 2000
PERPLEXITY_TOL = 1e-10  # on row entropy, in nats


@dataclass(frozen=True)
class PCAResult:
    projections: np.ndarray  # (m, k)
    components: np.ndarray  # (k, p), orthonormal rows
    eigenvalues: np.ndarray  # (k,), descending
    mean: np.ndarray

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components.T


def pca_project(x, k: int = 2) -> PCAResult:
    """Eigendecomposition of the sample covariance (n - 1 denominator).

    Each component's largest-magnitude entry is made positive.
    """
    x = np.asarray(x, dtype=np.float64)
    m, p = x.shape
    if m < 2:
        raise ValueError("PCA needs at least 2 rows")
    if not 1 <= k <= min(m, p):
        raise ValueError(f"k must be in 1..{min(m, p)}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (m - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T
    if k < p:
        # a partial basis reaching into the null space would be arbitrary
        rank = np.linalg.matrix_rank(xc)
        if k > rank:
            raise RankDeficient(f"k={k} exceeds the numerical rank {rank}")
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps = comps * flip[:, None]
    return PCAResult(xc @ comps.T, comps, evals, mean)


def joint_probabilities(x, perplexity: float = 30.0):
    """Symmetrized affinity matrix P and the per-row Gaussian precisions."""
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0]
    if perplexity >= m - 1:
        raise PerplexityTooLarge(f"perplexity {perplexity} must be below m - 1 = {m - 1}")
    sq = (x * x).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * x @ x.T, 0.0)
    np.fill_diagonal(d2, 0.0)
    pcond, betas = conditional_p(np.ascontiguousarray(d2), float(perplexity), PERPLEXITY_TOL)
    p = (pcond + pcond.T) / (2.0 * m)
    return p, pcond, betas


def row_perplexity(pcond) -> np.ndarray:
    """2 ** H(P_i) with H in bits, per row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(pcond > 0, pcond * np.log2(pcond), 0.0).sum(axis=1)
    return 2.0**h


def tsne_embed(
    x,
    perplexity: float = 30.0,
    iters: int = 1000,
    seed: int = 0,
    learning_rate: float | None = None,
    exaggeration: float = 12.0,
    exaggeration_iters: int = 100,
) -> np.ndarray:
    """Exact t-SNE to 2-D by gradient descent with momentum and adaptive gains.

    ``learning_rate=None`` picks max(m / exaggeration / 4, 50), which keeps
    small inputs from overshooting during the exaggeration phase.
    """
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0]
    if learning_rate is None:
        learning_rate = max(m / exaggeration / 4.0, 50.0)
    if m > TSNE_MAX_POINTS:
        raise ValueError(f"exact t-SNE is capped at {TSNE_MAX_POINTS} points, got {m}")
    p, _, _ = joint_probabilities(x, perplexity)
    p = np.maximum(p, 1e-12)
    np.fill_diagonal(p, 0.0)
    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, size=(m, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    for it in range(iters):
        scale = exaggeration if it < exaggeration_iters else 1.0
        grad, _ = kl_gradient(y, p * scale)
        momentum = 0.5 if it < 250 else 0.8
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
    return y


def kl_divergence(x, y, perplexity: float = 30.0) -> float:
    p, _, _ = joint_probabilities(x, perplexity)
    return kl_gradient(np.asarray(y, dtype=np.float64), p)[1]


def write_coordinates(path, coords, tags) -> None:
    """CSV with columns index, tag, c0, c1, ... for external plotting."""
    coords = np.asarray(coords)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "tag"] + [f"c{j}" for j in range(coords.shape[1])])
        for i, (row, tag) in enumerate(zip(coords, tags)):
            w.writerow([i, tag] + [repr(float(v)) for v in row])

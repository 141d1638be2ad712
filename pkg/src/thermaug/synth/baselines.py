"""Classical resampling synthesizers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import checkpoint
from ..errors import UnknownClass
from .base import CLASSES, Synthesizer, check_training_data


@dataclass
class BaselineSynth(Synthesizer):
    """Draw series from the per-class pool, optionally perturbed.

    ``bootstrap`` adds Gaussian jitter (zero by default). ``jitter_scale``
    rescales each draw about its own mean by a factor ~ N(1, scale_std) and
    then adds jitter.
    """

    kind: str = "bootstrap"
    jitter_std: float = 0.0
    scale_std: float = 0.0
    pool: np.ndarray | None = None
    pool_labels: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("bootstrap", "jitter_scale"):
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.kind == "jitter_scale" and self.jitter_std == 0 and self.scale_std == 0:
            self.jitter_std, self.scale_std = 0.02, 0.05

    @property
    def fitted(self) -> bool:
        return self.pool is not None

    def fit(self, x, labels=None, seed: int = 0) -> "BaselineSynth":
        x, labels = check_training_data(x, labels)
        self.pool = x.copy()
        self.pool_labels = labels.copy() if labels is not None else np.full(x.shape[0], -1)
        return self

    def _sample(self, n, cls, rng):
        candidates = np.arange(self.pool.shape[0]) if cls is None else np.flatnonzero(self.pool_labels == cls)
        if candidates.size == 0:
            raise UnknownClass(f"no training series of class {cls}")
        picks = self.pool[candidates[rng.integers(candidates.size, size=n)]]
        if self.kind == "jitter_scale":
            centre = picks.mean(axis=1, keepdims=True)
            picks = centre + rng.normal(1.0, self.scale_std, size=(n, 1)) * (picks - centre)
        if self.jitter_std > 0:
            picks = picks + rng.normal(0.0, self.jitter_std, size=picks.shape)
        return picks.copy()

    def save(self, path) -> None:
        meta = {"kind": self.kind, "jitter_std": self.jitter_std, "scale_std": self.scale_std}
        checkpoint.save(path, "baseline_synth", meta, {"pool": self.pool, "pool_labels": self.pool_labels})

    @classmethod
    def load(cls, path) -> "BaselineSynth":
        meta, arrays = checkpoint.load(path, "baseline_synth")
        return cls(meta["kind"], meta["jitter_std"], meta["scale_std"], arrays["pool"],
                   arrays["pool_labels"].astype(np.int64))

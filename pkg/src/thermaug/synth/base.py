"""Common interface for class-conditional series synthesizers.

Synthesizers work in scaled units on (n, 240) arrays. ``labels`` uses the
trend-class integers 0/1/2.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..dataio import SERIES_LENGTH
from ..errors import UnfittedModel, UnknownClass

CLASSES = (0, 1, 2)


class Synthesizer(ABC):
    kind: str = "abstract"

    @property
    @abstractmethod
    def fitted(self) -> bool: ...

    @abstractmethod
    def fit(self, x: np.ndarray, labels: np.ndarray | None = None, seed: int = 0) -> "Synthesizer": ...

    @abstractmethod
    def _sample(self, n: int, cls: int | None, rng: np.random.Generator) -> np.ndarray: ...

    @abstractmethod
    def save(self, path) -> None: ...

    def sample(self, n: int, cls: int | None = None, seed: int = 0) -> np.ndarray:
        """Draw ``n`` series; deterministic in (model, n, cls, seed)."""
        if not self.fitted:
            raise UnfittedModel(f"{self.kind} synthesizer has not been fitted")
        if n < 0:
            raise ValueError("n must be non-negative")
        if cls is not None and int(cls) not in CLASSES:
            raise UnknownClass(f"class {cls} is not one of {CLASSES}")
        if n == 0:
            return np.empty((0, SERIES_LENGTH))
        out = self._sample(n, None if cls is None else int(cls), np.random.default_rng(seed))
        assert out.shape == (n, SERIES_LENGTH) and np.all(np.isfinite(out))
        return out


def check_training_data(x, labels, min_series: int = 1):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != SERIES_LENGTH:
        raise ValueError(f"expected (n, {SERIES_LENGTH}) series, got {x.shape}")
    if x.shape[0] < min_series:
        raise ValueError(f"need at least {min_series} series, got {x.shape[0]}")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (x.shape[0],):
            raise ValueError("labels must have one entry per series")
        if np.any(~np.isin(labels, CLASSES)):
            raise UnknownClass("labels must be 0, 1 or 2")
    return x, labels

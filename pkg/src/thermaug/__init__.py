"""Synthetic augmentation of thermal test-cell series for short-term forecasting.

Modules: ``dataio`` (CSV, scaling, splits), ``sim`` (test-cell simulator),
``labeling`` (trend classes), ``forecaster`` (LSTM utility model),
``synth`` (VQ-VAE and baseline synthesizers), ``metrics``, ``diagnostics``
(PCA, t-SNE), ``harness`` (experiments) and ``cli``.
"""

from ._accel import backend

__version__ = "0.1.0"
__all__ = ["backend", "__version__"]

"""Forecast error metrics and outlier trimming.

MASE uses the forecast window itself as the naive baseline: the mean
absolute error divided by the mean absolute first difference of the actuals
over that same window.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .diagnostics import pca_project, tsne_embed  # noqa: F401  (re-exported)
from .errors import UndefinedMAPE, UndefinedMASE

MAPE_TOL = 1e-8
MASE_TOL = 1e-12
METRIC_NAMES = ("mse", "mae", "mape", "mase")


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {yhat.shape}")
    if y.size < 1:
        raise ValueError("metrics need at least one point")
    return y, yhat


def mse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def mape(y, yhat) -> float:
    """Mean absolute percentage error, as a fraction (0.15, not 15%)."""
    y, yhat = _pair(y, yhat)
    if np.any(np.abs(y) <= MAPE_TOL):
        raise UndefinedMAPE("an actual value is within 1e-8 of zero")
    return float(np.mean(np.abs((y - yhat) / y)))


def mase(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("mase needs a 1-D window of at least 2 points")
    steps = np.abs(np.diff(y))
    if steps.sum() <= MASE_TOL:
        raise UndefinedMASE("actuals are constant over the window")
    return mae(y, yhat) / float(steps.mean())


@dataclass(frozen=True)
class MetricBundle:
    """Metrics averaged over forecast windows.

    MAPE and MASE skip the windows where they are undefined; the ``*_defined``
    flags are False when no window qualified, in which case the value is NaN.
    """

    mse: float
    mae: float
    mape: float
    mase: float
    mape_defined: bool = True
    mase_defined: bool = True
    mape_skipped: int = 0
    mase_skipped: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(targets, preds) -> MetricBundle:
    """Score (n_windows, horizon) forecasts, one metric value per window then averaged."""
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    preds = np.atleast_2d(np.asarray(preds, dtype=np.float64))
    mapes, mases = [], []
    for y, yh in zip(targets, preds):
        try:
            mapes.append(mape(y, yh))
        except UndefinedMAPE:
            pass
        try:
            mases.append(mase(y, yh))
        except UndefinedMASE:
            pass
    n = targets.shape[0]
    return MetricBundle(
        mse=mse(targets, preds),
        mae=mae(targets, preds),
        mape=float(np.mean(mapes)) if mapes else float("nan"),
        mase=float(np.mean(mases)) if mases else float("nan"),
        mape_defined=bool(mapes),
        mase_defined=bool(mases),
        mape_skipped=n - len(mapes),
        mase_skipped=n - len(mases),
    )


def trim_outliers(values, fraction: float = 0.05) -> np.ndarray:
    """Drop values outside the [f/2, 1 - f/2] empirical quantiles.

    Quantiles are taken from the empirical CDF (inverse-CDF definition), so
    at most ``floor(n * f / 2)`` values leave each tail.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    v = np.asarray(values, dtype=np.float64)
    if fraction == 0 or v.size == 0:
        return v.copy()
    lo = np.quantile(v, fraction / 2, method="inverted_cdf")
    hi = np.quantile(v, 1 - fraction / 2, method="inverted_cdf")
    return v[(v >= lo) & (v <= hi)]

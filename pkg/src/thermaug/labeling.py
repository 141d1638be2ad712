"""Trend classes computed from the smoothed first three hours of a series."""

from __future__ import annotations

from enum import IntEnum
from typing import Iterable

import numpy as np

from .dataio import SeriesRecord
from .errors import BadWindow

LABEL_HORIZON = 180
EPS_SLOPE = 0.01  # degC / min
EPS_NET = 0.2  # degC


class TrendClass(IntEnum):
    MONOTONIC_POSITIVE = 0
    MONOTONIC_NEGATIVE = 1
    NON_MONOTONIC = 2


def smooth_ma(x, window: int = 5) -> np.ndarray:
    """Centered moving average with edge-repetition padding."""
    x = np.asarray(x, dtype=np.float64)
    if window < 1 or window % 2 == 0 or window > x.size:
        raise BadWindow(f"window must be odd and within 1..{x.size}, got {window}")
    half = (window - 1) // 2
    padded = np.pad(x, half, mode="edge")
    # average deviations from the centre sample so flat stretches stay exact
    dev = np.zeros_like(x)
    for k in range(window):
        dev += padded[k : k + x.size] - x
    return x + dev / window


def classify(values, eps_slope: float = EPS_SLOPE, eps_net: float = EPS_NET) -> TrendClass:
    if eps_slope < 0 or eps_net < 0:
        raise ValueError("tolerances must be non-negative")
    seg = np.asarray(values, dtype=np.float64)[:LABEL_HORIZON]
    s = smooth_ma(seg, 5)
    d = np.diff(s)
    net = s[-1] - s[0]
    if d.min() >= -eps_slope and net > eps_net:
        return TrendClass.MONOTONIC_POSITIVE
    if d.max() <= eps_slope and net < -eps_net:
        return TrendClass.MONOTONIC_NEGATIVE
    return TrendClass.NON_MONOTONIC


def label_series(series: SeriesRecord, eps_slope: float = EPS_SLOPE, eps_net: float = EPS_NET) -> TrendClass:
    return classify(series.values, eps_slope, eps_net)


def label_records(records: Iterable[SeriesRecord], eps_slope: float = EPS_SLOPE, eps_net: float = EPS_NET) -> list[SeriesRecord]:
    return [r.with_label(int(label_series(r, eps_slope, eps_net))) for r in records]

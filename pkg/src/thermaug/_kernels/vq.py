"""Nearest-code search for vector quantization.

Returns 0-based indices; ties go to the smallest index. Distances are
computed as explicit squared differences (not the expanded dot-product form)
so that exact ties stay exact.
"""

from __future__ import annotations

import numpy as np

from .._accel import USE_NUMBA, njit

_CHUNK = 256


def nearest_code_numpy(z, codes):
    n = z.shape[0]
    idx = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for lo in range(0, n, _CHUNK):
        diff = z[lo : lo + _CHUNK, None, :] - codes[None, :, :]
        d2 = np.einsum("nkd,nkd->nk", diff, diff)
        k = np.argmin(d2, axis=1)
        idx[lo : lo + _CHUNK] = k
        dist[lo : lo + _CHUNK] = d2[np.arange(k.size), k]
    return idx, dist


@njit
def nearest_code_numba(z, codes):
    n, d = z.shape
    K = codes.shape[0]
    idx = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for i in range(n):
        best = np.inf
        arg = 0
        for k in range(K):
            s = 0.0
            for j in range(d):
                r = z[i, j] - codes[k, j]
                s += r * r
            if s < best:
                best = s
                arg = k
        idx[i] = arg
        dist[i] = best
    return idx, dist


nearest_code = nearest_code_numba if USE_NUMBA else nearest_code_numpy

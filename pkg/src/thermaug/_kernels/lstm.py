"""LSTM forward/backward over a full sequence.

Arrays are time-major: ``x`` is (T, B, I), hidden states are (T, B, H).
Gate order in the packed weight matrices is input, forget, cell, output.
``gates`` stores post-activation gate values, which is all the backward pass
needs besides the cell states.
"""

from __future__ import annotations

import numpy as np

from .._accel import USE_NUMBA, njit


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def lstm_forward_numpy(x, wx, wh, b, h0, c0):
    T, B, _ = x.shape
    H = wh.shape[0]
    hs = np.empty((T, B, H))
    cs = np.empty((T, B, H))
    gates = np.empty((T, B, 4 * H))
    xw = x @ wx + b
    h, c = h0, c0
    for t in range(T):
        a = xw[t] + h @ wh
        g = gates[t]
        g[:, : 2 * H] = _sigmoid(a[:, : 2 * H])
        g[:, 2 * H : 3 * H] = np.tanh(a[:, 2 * H : 3 * H])
        g[:, 3 * H :] = _sigmoid(a[:, 3 * H :])
        c = g[:, H : 2 * H] * c + g[:, :H] * g[:, 2 * H : 3 * H]
        h = g[:, 3 * H :] * np.tanh(c)
        hs[t] = h
        cs[t] = c
    return hs, cs, gates


def lstm_backward_numpy(dhs, x, wx, wh, h0, c0, hs, cs, gates):
    T, B, H = hs.shape
    da_all = np.empty((T, B, 4 * H))
    dwh = np.zeros_like(wh)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        g = gates[t]
        i, f, gg, o = g[:, :H], g[:, H : 2 * H], g[:, 2 * H : 3 * H], g[:, 3 * H :]
        c_prev = cs[t - 1] if t > 0 else c0
        h_prev = hs[t - 1] if t > 0 else h0
        tc = np.tanh(cs[t])
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        da = da_all[t]
        da[:, :H] = dc * gg * i * (1.0 - i)
        da[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        da[:, 2 * H : 3 * H] = dc * i * (1.0 - gg * gg)
        da[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dwh += h_prev.T @ da
        dh_next = da @ wh.T
    I = x.shape[2]
    dwx = x.reshape(T * B, I).T @ da_all.reshape(T * B, 4 * H)
    db = da_all.sum(axis=(0, 1))
    dx = da_all @ wx.T
    return dx, dwx, dwh, db


@njit
def lstm_forward_numba(x, wx, wh, b, h0, c0):
    T, B, I = x.shape
    H = wh.shape[0]
    hs = np.empty((T, B, H))
    cs = np.empty((T, B, H))
    gates = np.empty((T, B, 4 * H))
    h = h0.copy()
    c = c0.copy()
    for t in range(T):
        # matmuls go to BLAS; the gate nonlinearities are fused per element
        a = np.dot(np.ascontiguousarray(x[t]), wx) + np.dot(h, wh)
        for bi in range(B):
            for k in range(H):
                ig = 1.0 / (1.0 + np.exp(-(a[bi, k] + b[k])))
                fg = 1.0 / (1.0 + np.exp(-(a[bi, H + k] + b[H + k])))
                gg = np.tanh(a[bi, 2 * H + k] + b[2 * H + k])
                og = 1.0 / (1.0 + np.exp(-(a[bi, 3 * H + k] + b[3 * H + k])))
                cn = fg * c[bi, k] + ig * gg
                c[bi, k] = cn
                h[bi, k] = og * np.tanh(cn)
                gates[t, bi, k] = ig
                gates[t, bi, H + k] = fg
                gates[t, bi, 2 * H + k] = gg
                gates[t, bi, 3 * H + k] = og
        hs[t] = h
        cs[t] = c
    return hs, cs, gates


@njit
def lstm_backward_numba(dhs, x, wx, wh, h0, c0, hs, cs, gates):
    T, B, H = hs.shape
    I = x.shape[2]
    da_all = np.empty((T, B, 4 * H))
    dwh = np.zeros_like(wh)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    wh_t = np.ascontiguousarray(wh.T)
    for t in range(T - 1, -1, -1):
        da = da_all[t]
        for bi in range(B):
            for k in range(H):
                ig = gates[t, bi, k]
                fg = gates[t, bi, H + k]
                gg = gates[t, bi, 2 * H + k]
                og = gates[t, bi, 3 * H + k]
                c_prev = cs[t - 1, bi, k] if t > 0 else c0[bi, k]
                tc = np.tanh(cs[t, bi, k])
                dh = dhs[t, bi, k] + dh_next[bi, k]
                dc = dc_next[bi, k] + dh * og * (1.0 - tc * tc)
                da[bi, k] = dc * gg * ig * (1.0 - ig)
                da[bi, H + k] = dc * c_prev * fg * (1.0 - fg)
                da[bi, 2 * H + k] = dc * ig * (1.0 - gg * gg)
                da[bi, 3 * H + k] = dh * tc * og * (1.0 - og)
                dc_next[bi, k] = dc * fg
        h_prev = hs[t - 1] if t > 0 else h0
        dwh += np.dot(np.ascontiguousarray(h_prev.T), da)
        dh_next = np.dot(da, wh_t)
    da2 = da_all.reshape(T * B, 4 * H)
    dwx = np.dot(np.ascontiguousarray(x.reshape(T * B, I).T), da2)
    db = da2.sum(axis=0)
    dx = np.dot(da2, np.ascontiguousarray(wx.T)).reshape(T, B, I)
    return dx, dwx, dwh, db


# The forward pass is dominated by exp/tanh over the gates. numpy evaluates
# those with SIMD loops while numba (without Intel SVML) calls scalar libm, so
# the numpy forward is faster at every shape we run (see the benchmark) and is
# used under both backends. The compiled twin is kept and parity-tested.
lstm_forward = lstm_forward_numpy
lstm_backward = lstm_backward_numba if USE_NUMBA else lstm_backward_numpy

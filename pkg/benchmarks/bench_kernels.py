"""Time every hot kernel on its numba and numpy paths.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both variants are imported directly (``*_numba`` / ``*_numpy``), so the
result does not depend on THERMAUG_DISABLE_NUMBA. The first numba call of
each kernel compiles (or loads the on-disk cache) and is excluded.
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from thermaug._kernels import lstm, thermal, tsne, vq


def _lstm_args(rng, T, B, I, H):
    return (rng.normal(size=(T, B, I)), rng.normal(0, 0.3, size=(I, 4 * H)), rng.normal(0, 0.3, size=(H, 4 * H)),
            rng.normal(0, 0.1, size=4 * H), np.zeros((B, H)), np.zeros((B, H)))


def cases(rng):
    """(name, numba_callable, numpy_callable) with shapes taken from real call sites."""
    out = []
    for tag, shape in (("forecaster", (21, 16, 1, 64)), ("token prior", (30, 32, 32, 64))):
        args = _lstm_args(rng, *shape)
        out.append((f"lstm_forward ({tag})", lambda a=args: lstm.lstm_forward_numba(*a),
                    lambda a=args: lstm.lstm_forward_numpy(*a)))
        fwd = lstm.lstm_forward_numpy(*args)
        dhs = rng.normal(size=fwd[0].shape)
        bargs = (dhs, args[0], args[1], args[2], args[4], args[5], *fwd)
        out.append((f"lstm_backward ({tag})", lambda a=bargs: lstm.lstm_backward_numba(*a),
                    lambda a=bargs: lstm.lstm_backward_numpy(*a)))

    z, codes = rng.normal(size=(16 * 30, 32)), rng.normal(size=(64, 32))
    out.append(("nearest_code (480 x 64 x 32)", lambda: vq.nearest_code_numba(z, codes),
                lambda: vq.nearest_code_numpy(z, codes)))

    x = rng.normal(size=(400, 10))
    d2 = ((x[:, None] - x[None]) ** 2).sum(axis=2)
    out.append(("conditional_p (m=400)", lambda: tsne.conditional_p_numba(d2, 30.0, 1e-10),
                lambda: tsne.conditional_p_numpy(d2, 30.0, 1e-10)))
    p, _ = tsne.conditional_p_numpy(d2, 30.0, 1e-10)
    p = (p + p.T) / (2 * p.shape[0])
    y = rng.normal(size=(400, 2))
    out.append(("kl_gradient (m=400)", lambda: tsne.kl_gradient_numba(y, p), lambda: tsne.kl_gradient_numpy(y, p)))

    n = 240
    th = (rng.uniform(15, 25, size=6), rng.uniform(0, 10, size=n), np.array([40.0, np.nan, 15.0, np.nan]),
          np.tile([True, False, True, False], (n, 1)), 8e5, 8e6, 150.0, 40.0, np.array([80.0, 80.0, 60.0, 60.0]),
          600.0, 60.0)
    out.append(("euler (240 steps)", lambda: thermal.euler_numba(*th), lambda: thermal.euler_numpy(*th)))
    return out


def best_of(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    rows = []
    for name, fast, slow in cases(np.random.default_rng(args.seed)):
        fast()  # compile or load cache
        t_nb, t_np = best_of(fast, args.repeat), best_of(slow, args.repeat)
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb})

    width = max(len(r["kernel"]) for r in rows)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>7}")
    for r in rows:
        print(f"{r['kernel']:<{width}}  {r['numba_s'] * 1e3:8.3f}ms  {r['numpy_s'] * 1e3:8.3f}ms  {r['speedup']:6.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

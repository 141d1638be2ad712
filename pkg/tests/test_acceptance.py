"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records PASS or FAIL in ``RESULTS``; the conftest terminal
summary prints one line per criterion. Criteria 5-9 train real models and
take minutes each on one core.
"""

import functools
import json
import subprocess
import sys
import time
import warnings
from fractions import Fraction

import numpy as np
import pytest

from oracles import finite_difference, label_ref, nearest_ref, pca_eigenvalues_ref
from thermaug.dataio import SeriesRecord, holdout_size, labels_array, split_by_phase
from thermaug.diagnostics import joint_probabilities, pca_project, row_perplexity
from thermaug.errors import CodebookCollapse, UndefinedMASE
from thermaug.forecaster import ForecastModel, mse_loss, loss_and_grads
from thermaug.harness import aggregate, limit_train, run_exp1, run_exp2
from thermaug.labeling import classify, label_records
from thermaug.metrics import mae, mape, mase, mse
from thermaug.sim import SimConfig, generate_rico_like
from thermaug.synth import Codebook, VQConfig, VQSynth, make_synth, train_vqvae

RESULTS: dict[int, tuple[str, bool, str]] = {}


def criterion(n, title):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs) or ""
            except BaseException as exc:
                RESULTS[n] = (title, False, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
                raise
            RESULTS[n] = (title, True, f"{detail} ({time.perf_counter() - t0:.1f}s)".strip())

        return wrapper

    return deco


@pytest.fixture(scope="module")
def records():
    return label_records(generate_rico_like(SimConfig(seed=1)))


def _exact(value, expected):
    return abs(Fraction(value) - Fraction(expected)) <= Fraction(1, 10**12)


@criterion(1, "metric oracle suite")
def test_c1_metric_oracles():
    t0 = time.perf_counter()
    assert _exact(mse([0, 3], [1, 1]), Fraction(5, 2))
    assert _exact(mae([0, 3], [1, 1]), Fraction(3, 2))
    assert _exact(mae([1, 3, 2, 4], [2, 2, 2, 2]), 1)
    assert _exact(mase([1, 3, 2, 4], [2, 2, 2, 2]), Fraction(3, 5))
    assert abs(mape([1, 2, 4], [1.1, 1.8, 5]) - 0.15) <= 1e-9
    y = np.array([1.0, 3.0, 2.0])
    assert mse(y, y) == mae(y, y) == mape(y, y) == mase(y, y) == 0.0
    with pytest.raises(UndefinedMASE):
        mase([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        n = rng.integers(2, 20)
        y, yh = rng.normal(size=n), rng.normal(size=n)
        alpha = rng.uniform(0.01, 100.0) * rng.choice([-1.0, 1.0])
        base = mase(y, yh)
        worst = max(worst, abs(mase(alpha * y, alpha * yh) - base) / base)
    assert worst <= 1e-9
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    return f"max scale-invariance rel err {worst:.1e}"


@criterion(2, "split accounting 116 train / 31 test")
def test_c2_split_accounting(records):
    assert [sum(r.phase == p for r in records) for p in (1, 2, 3, 4)] == [83, 41, 6, 17]
    split = split_by_phase(records, 0.2, seed=0)
    got = (len(split.train), len(split.test))
    assert got == (116, 31), f"got {got[0]} train / {got[1]} test"


@criterion(3, "labeling properties on 1000 simulator series")
def test_c3_labeling_properties():
    series = []
    seed = 100
    while len(series) < 1000:
        series += [r.values for r in generate_rico_like(SimConfig(seed=seed))]
        seed += 1
    series = series[:1000]
    rng = np.random.default_rng(0)
    swap = {0: 1, 1: 0, 2: 2}
    classes = np.zeros(3, dtype=int)
    for x in series:
        c = int(classify(x))
        classes[c] += 1
        assert c == label_ref(x)
        assert int(classify(-x)) == swap[c]
        assert int(classify(x + rng.uniform(-50, 50))) == c
        tail = x.copy()
        tail[180:] = rng.normal(0, 100, size=60)
        assert int(classify(tail)) == c
    t = np.arange(240.0)
    assert int(classify(20 + 0.05 * t)) == 0
    assert int(classify(20 - 0.05 * t)) == 1
    assert int(classify(20 + 3 * np.sin(2 * np.pi * t / 120))) == 2
    return f"class counts {classes.tolist()}"


@criterion(4, "forecaster gradient check at 20 points")
def test_c4_forecaster_gradients():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        params = ForecastModel.init(64, 3, rng).params
        for k in params:
            params[k] = params[k] + rng.normal(0, 0.1, size=params[k].shape)
        x, y = rng.normal(size=(8, 21)), rng.normal(size=(8, 3))
        _, grads = loss_and_grads(params, x, y)
        for key in ("wx", "wh", "b", "w_out", "b_out"):
            idx = tuple(rng.integers(0, s) for s in params[key].shape)
            fd = finite_difference(lambda: mse_loss(params, x, y), params, key, idx, step=1e-4)
            g = grads[key][idx]
            scale = max(abs(fd), abs(g))
            if scale > 1e-9:
                worst = max(worst, abs(fd - g) / scale)
    assert worst <= 1e-4, f"worst rel err {worst:.2e}"
    assert time.perf_counter() - t0 < 30
    return f"worst rel err {worst:.1e}"


@criterion(5, "VQ nearest code and single-series memorization")
def test_c5_vq(records):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    for _ in range(10):
        cb = Codebook.from_vectors(rng.normal(size=(64, 32)), 0.99)
        z = rng.normal(size=(1000, 32))
        idx, _, _ = cb.quantize(z)
        assert list(idx) == [nearest_ref(q, cb.codes) for q in z]
    s = np.array(records[0].values)
    s = (s - s.mean()) / s.std()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CodebookCollapse)
        ae = train_vqvae(np.tile(s, (8, 1)), VQConfig(), seed=0)
    err = float(np.mean((ae.reconstruct(s[None])[0] - s) ** 2))
    elapsed = time.perf_counter() - t0
    assert err < 1e-3, f"reconstruction MSE {err:.2e}"
    assert elapsed < 300, f"took {elapsed:.0f}s"
    return f"reconstruction MSE {err:.1e}"


@criterion(6, "conditional fidelity >= 70% per class")
def test_c6_conditional_fidelity(records):
    t0 = time.perf_counter()
    split = split_by_phase(records, 0.2, seed=0)
    assert len(split.train) >= 90
    x = split.scaler.apply(np.stack([r.values for r in split.train]))
    synth = VQSynth().fit(x, labels_array(split.train), seed=0)
    rates = []
    for c in (0, 1, 2):
        samples = split.scaler.invert(synth.sample(500, c, seed=60 + c))
        rates.append(float(np.mean([int(classify(v)) == c for v in samples])))
    elapsed = time.perf_counter() - t0
    assert min(rates) >= 0.70, f"rates {rates}"
    assert elapsed < 900, f"took {elapsed:.0f}s"
    return "rates " + ", ".join(f"{r:.3f}" for r in rates)


@criterion(7, "experiment 1 TRSTR < TRTR mean MAE in >= 4 of 5 seeds")
def test_c7_exp1_direction(records):
    t0 = time.perf_counter()
    wins, per_seed = 0, []
    for s in range(5):
        split = limit_train(split_by_phase(records, 0.2, seed=s), 30, seed=s)
        x = split.scaler.apply(np.stack([r.values for r in split.train]))
        synth = VQSynth().fit(x, labels_array(split.train), seed=s)
        agg = aggregate(run_exp1(split, synth, runs=20, synth_n=64, seed=s))
        trtr, trstr = agg["trtr"]["mae_mean"], agg["trstr"]["mae_mean"]
        wins += trstr < trtr
        per_seed.append(f"{trtr:.4f}/{trstr:.4f}")
    elapsed = time.perf_counter() - t0
    detail = f"{wins}/5 seeds, trtr/trstr MAE " + " ".join(per_seed)
    assert wins >= 4, detail
    assert elapsed < 3600, f"took {elapsed:.0f}s"
    return detail


@criterion(8, "experiment 2 accounting and r=1.0 neutrality")
def test_c8_exp2(records):
    t0 = time.perf_counter()
    split = limit_train(split_by_phase(records, 0.2, seed=0), 45, seed=0)
    # r = 1.0 adds no samples, so synthesizer quality cannot matter there; a shorter
    # fit keeping the 1:5 stage ratio keeps the 12-synthesizer grid at desk scale
    factory = lambda: make_synth("vqvae", vq_epochs=200, prior_epochs=1000)  # noqa: E731
    m = run_exp2(split, runs=20, seed=0, synth_factory=factory)
    assert m.grid["n_synthesizers"] == 12 and len(m.scenarios) == 12
    for sc in m.scenarios:
        assert sc["counts_augmented"] == sc["counts_full"], sc["tag"]
    agg = aggregate(m)
    zs = []
    for c in (0, 1, 2):
        b, a = agg[f"c{c}_r1_baseline"], agg[f"c{c}_r1_augmented"]
        se = np.sqrt(b["mae_std"] ** 2 / b["n"] + a["mae_std"] ** 2 / a["n"])
        zs.append(abs(b["mae_mean"] - a["mae_mean"]) / se)
    elapsed = time.perf_counter() - t0
    detail = "r=1.0 |diff|/SE " + ", ".join(f"{z:.2f}" for z in zs)
    assert max(zs) <= 2.0, detail
    assert elapsed < 5400, f"took {elapsed:.0f}s"
    return detail


def _cli(*args):
    r = subprocess.run([sys.executable, "-m", "thermaug.cli", *args], capture_output=True, text=True, timeout=1800)
    assert r.returncode == 0, r.stderr
    return r


@criterion(9, "exp1/exp2 manifests byte-identical across executions")
def test_c9_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "synth": {"kind": "vqvae", "codebook_size": 16, "code_dim": 8, "hidden": 16, "vq_epochs": 20,
                  "prior_epochs": 100, "prior_embed": 8, "prior_hidden": 16, "refine_channels": 4},
        "train": {"hidden": 8, "epochs": 5},
        "exp1": {"runs": 2, "synth_n": 16, "train_limit": 40},
        "exp2": {"runs": 2, "train_limit": 40},
    }))
    data, split = tmp_path / "d.csv", tmp_path / "s.json"
    _cli("simulate", "--out", str(data), "--seed", "2")
    _cli("label", "--data", str(data))
    _cli("split", "--data", str(data), "--out", str(split))
    same = {}
    for exp in ("exp1", "exp2"):
        outs = []
        for k in range(2):
            out = tmp_path / f"{exp}_{k}"
            _cli(exp, "--data", str(data), "--split", str(split), "--out", str(out), "--config", str(cfg), "--seed", "5")
            outs.append((out / "manifest.json").read_bytes())
        same[exp] = outs[0] == outs[1]
    assert all(same.values()), same


@criterion(10, "PCA eigenvalue and t-SNE perplexity oracles")
def test_c10_pca_tsne():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        m, p = rng.integers(5, 60), rng.integers(2, 20)
        x = rng.normal(size=(m, p)) * rng.uniform(0.1, 5, size=p)
        res = pca_project(x, k=2)
        ref = pca_eigenvalues_ref(x, 2)
        var = res.projections.var(axis=0, ddof=1)
        assert np.allclose(var, ref, rtol=1e-9, atol=1e-9)
        assert np.allclose(res.eigenvalues, ref, rtol=1e-9, atol=1e-9)
        worst = max(worst, float(np.max(np.abs(var - ref) / ref)))
    perp_err = 0.0
    for perp in (5.0, 15.0, 30.0):
        _, pcond, _ = joint_probabilities(rng.normal(size=(200, 10)), perp)
        perp_err = max(perp_err, float(np.max(np.abs(row_perplexity(pcond) - perp))))
    assert perp_err <= 1e-5
    return f"PCA rel err {worst:.1e}, perplexity err {perp_err:.1e}"

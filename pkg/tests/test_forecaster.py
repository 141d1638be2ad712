import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermaug.dataio import SeriesRecord, StandardScaler, subsample
from thermaug.forecaster import (
    ForecastModel,
    TrainConfig,
    Windows,
    loss_and_grads,
    make_windows,
    mse_loss,
    predict,
    train_forecaster,
    windows_from_records,
    windows_from_scaled,
)
from thermaug.nn import Adam


def _params(rng, H=4):
    return ForecastModel.init(H, 3, rng).params


def _const_windows(n=24, c=0.7):
    return Windows(np.full((n, 21), 0.3), np.full((n, 3), c), [("k", i) for i in range(n)])


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    params = _params(rng)
    x, y = rng.normal(size=(5, 21)), rng.normal(size=(5, 3))
    _, grads = loss_and_grads(params, x, y)
    step = 1e-4
    picks = [(k, tuple(rng.integers(0, s) for s in params[k].shape)) for k in ("wx", "wh", "b", "w_out", "b_out")]
    for key, idx in picks:  # one entry per parameter tensor, a 5-parameter slice
        old = params[key][idx]
        params[key][idx] = old + step
        up = mse_loss(params, x, y)
        params[key][idx] = old - step
        down = mse_loss(params, x, y)
        params[key][idx] = old
        fd = (up - down) / (2 * step)
        err = abs(fd - grads[key][idx]) / max(abs(fd), abs(grads[key][idx]), 1e-8)
        assert err <= 1e-4 or abs(fd - grads[key][idx]) < 1e-10


def test_constant_dataset_learns_constant():
    w = _const_windows()
    model, report = train_forecaster(w, TrainConfig(hidden=8, lr=1e-2, epochs=300), seed=0)
    assert np.allclose(predict(model, w.inputs), 0.7, atol=1e-2)
    assert report.val_loss[report.selected_epoch] == min(report.val_loss)


def test_default_config_loss_falls_by_epoch_50():
    w = _const_windows()
    _, report = train_forecaster(w, TrainConfig(patience=1000, epochs=51), seed=1)
    assert report.train_loss[50] < report.train_loss[0]


def test_training_is_deterministic(rng):
    w = Windows(rng.normal(size=(20, 21)), rng.normal(size=(20, 3)))
    cfg = TrainConfig(hidden=6, epochs=15)
    a, _ = train_forecaster(w, cfg, seed=5)
    b, _ = train_forecaster(w, cfg, seed=5)
    c, _ = train_forecaster(w, cfg, seed=6)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert not np.array_equal(a.params["wh"], c.params["wh"])


def test_needs_two_windows():
    with pytest.raises(ValueError):
        train_forecaster(_const_windows(n=1))


def test_zero_head_predicts_bias(rng):
    model = ForecastModel.init(5, 3, rng)
    model.params["w_out"][:] = 0.0
    model.params["b_out"][:] = [0.1, -0.2, 0.3]
    out = predict(model, rng.normal(size=(4, 21)))
    assert np.array_equal(out, np.tile([0.1, -0.2, 0.3], (4, 1)))


def test_prediction_invariant_to_batch_order(rng):
    model = ForecastModel.init(5, 3, rng)
    x = rng.normal(size=(7, 21))
    perm = rng.permutation(7)
    assert np.allclose(predict(model, x)[perm], predict(model, x[perm]), atol=1e-14)
    assert np.allclose(predict(model, x[2]), predict(model, x)[2], atol=1e-14)


def test_overfits_single_window(rng):
    params = _params(rng, H=8)
    x, y = rng.normal(size=(1, 21)), rng.normal(size=(1, 3))
    opt = Adam(params, lr=1e-2)
    for _ in range(3000):
        loss, grads = loss_and_grads(params, x, y)
        if loss < 1e-7:
            break
        opt.step(grads)
    assert mse_loss(params, x, y) < 1e-6


def _record(values):
    return SeriesRecord(phase=1, step=0, flag=0, setpoints=(40.0, float("nan"), float("nan"), float("nan")), values=values)


def test_constant_series_at_mean_gives_zero_windows():
    scaler = StandardScaler(mean=20.0, std=2.0)
    w = windows_from_records([_record(np.full(240, 20.0))], scaler)
    assert np.array_equal(w.inputs, np.zeros((1, 21))) and np.array_equal(w.targets, np.zeros((1, 3)))


@given(st.integers(0, 2**32 - 1))
def test_windows_recompose_subsampled_series(seed):
    x = np.random.default_rng(seed).normal(size=(3, 240))
    w = windows_from_scaled(x)
    assert np.array_equal(np.concatenate([w.inputs, w.targets], axis=1), subsample(x, 10))


def test_one_window_per_series(sim_split):
    train_w, test_w = make_windows(sim_split)
    assert len(train_w) == len(sim_split.train) and len(test_w) == len(sim_split.test)
    assert train_w.keys == [r.key for r in sim_split.train]


def test_sliding_windows():
    x = np.arange(240.0)[None]
    w = windows_from_scaled(x, [("a",)], TrainConfig(input_len=9, window_step=5))
    assert len(w) == 4  # starts 0, 5, 10, 12
    assert np.array_equal(w.inputs[1], np.arange(50.0, 140.0, 10.0))
    assert np.array_equal(w.targets[-1], [210.0, 220.0, 230.0])
    assert w.keys == [("a",)] * 4
    with pytest.raises(ValueError):
        windows_from_scaled(x, None, TrainConfig(input_len=30))


def test_checkpoint_round_trip(tmp_path, rng):
    model = ForecastModel.init(6, 3, rng, TrainConfig(hidden=6, lr=0.01))
    path = tmp_path / "f.ckpt"
    model.save(path)
    back = ForecastModel.load(path)
    assert back.hidden == 6 and back.config == model.config
    x = rng.normal(size=(3, 21))
    assert np.array_equal(predict(back, x), predict(model, x))


def test_report_csv(tmp_path):
    _, report = train_forecaster(_const_windows(), TrainConfig(hidden=4, epochs=3), seed=0)
    path = tmp_path / "r.csv"
    report.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss,selected" and len(lines) == 4

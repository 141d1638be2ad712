"""Single-layer LSTM plus affine head forecasting the last 30 minutes of a series.

Each 240-minute series is scaled, subsampled by 10 and by default cut into
one window: the first 21 points are the input, the last 3 the target. A
shorter ``input_len`` with ``window_step > 0`` slides several windows over
each series instead. Everything here works in standardized units.
"""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import checkpoint
from ._kernels.lstm import lstm_backward, lstm_forward
from .dataio import DatasetSplit, SeriesRecord, subsample
from .errors import NonFiniteLoss
from .nn import Adam, minibatches, uniform_init

PARAM_ORDER = ("wx", "wh", "b", "w_out", "b_out")


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 64
    lr: float = 1e-3
    epochs: int = 300
    batch_size: int = 16
    patience: int = 20
    val_fraction: float = 0.1
    factor: int = 10
    horizon: int = 3
    subsample_mode: str = "stride"
    input_len: int | None = None  # None: everything before the target
    window_step: int = 0  # 0: one window per series, anchored at the end

    @classmethod
    def from_dict(cls, d: dict | None) -> "TrainConfig":
        return cls(**(d or {}))


@dataclass
class Windows:
    inputs: np.ndarray  # (n, 21)
    targets: np.ndarray  # (n, 3)
    keys: list = field(default_factory=list)

    def __len__(self):
        return self.inputs.shape[0]

    def concat(self, other: "Windows") -> "Windows":
        return Windows(
            np.concatenate([self.inputs, other.inputs]),
            np.concatenate([self.targets, other.targets]),
            list(self.keys) + list(other.keys),
        )


def windows_from_scaled(x, keys=None, cfg: TrainConfig | None = None) -> Windows:
    """Cut already-scaled (n, 240) series into input/target windows.

    Sliding windows start at offsets 0, step, 2 * step, ... and always include
    the series-final window; each window keeps its series key.
    """
    cfg = cfg or TrainConfig()
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    sub = subsample(x, cfg.factor, cfg.subsample_mode)
    keys = list(keys) if keys is not None else [None] * x.shape[0]
    m, h = sub.shape[1], cfg.horizon
    span = m if cfg.input_len is None else cfg.input_len + h
    if not h < span <= m:
        raise ValueError(f"input_len + horizon must lie in ({h}, {m}]")
    last = m - span
    starts = [last] if cfg.window_step <= 0 else sorted(set(range(0, last + 1, cfg.window_step)) | {last})
    win = np.stack([sub[:, s : s + span] for s in starts], axis=1).reshape(-1, span)
    keys = [k for k in keys for _ in starts]
    return Windows(np.ascontiguousarray(win[:, :-h]), np.ascontiguousarray(win[:, -h:]), keys)


def windows_from_records(records, scaler, cfg: TrainConfig | None = None) -> Windows:
    cfg = cfg or TrainConfig()
    if not records:
        n_in = cfg.input_len or 240 // cfg.factor - cfg.horizon
        return Windows(np.empty((0, n_in)), np.empty((0, cfg.horizon)), [])
    x = scaler.apply(np.stack([r.values for r in records]))
    return windows_from_scaled(x, [r.key for r in records], cfg)


def make_windows(split: DatasetSplit, cfg: TrainConfig | None = None) -> tuple[Windows, Windows]:
    return (windows_from_records(split.train, split.scaler, cfg),
            windows_from_records(split.test, split.scaler, cfg))


@dataclass
class ForecastModel:
    params: dict
    hidden: int
    horizon: int = 3
    config: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def init(cls, hidden: int, horizon: int, rng, config: TrainConfig | None = None) -> "ForecastModel":
        H = hidden
        params = {
            "wx": uniform_init(rng, (1, 4 * H), H),
            "wh": uniform_init(rng, (H, 4 * H), H),
            "b": uniform_init(rng, (4 * H,), H),
            "w_out": uniform_init(rng, (H, horizon), H),
            "b_out": uniform_init(rng, (horizon,), H),
        }
        return cls(params, hidden, horizon, config or TrainConfig(hidden=hidden, horizon=horizon))

    def save(self, path) -> None:
        meta = {"hidden": self.hidden, "horizon": self.horizon, "input_size": 1, "config": asdict(self.config)}
        checkpoint.save(path, "forecaster", meta, {k: self.params[k] for k in PARAM_ORDER})

    @classmethod
    def load(cls, path) -> "ForecastModel":
        meta, arrays = checkpoint.load(path, "forecaster")
        return cls(arrays, meta["hidden"], meta["horizon"], TrainConfig.from_dict(meta["config"]))


def _forward(params, inputs):
    x = np.ascontiguousarray(inputs.T[:, :, None])  # (T, B, 1)
    B = inputs.shape[0]
    H = params["wh"].shape[0]
    h0 = np.zeros((B, H))
    hs, cs, gates = lstm_forward(x, params["wx"], np.ascontiguousarray(params["wh"]), params["b"], h0, h0)
    pred = hs[-1] @ params["w_out"] + params["b_out"]
    return pred, (x, h0, hs, cs, gates)


def predict(model: ForecastModel, inputs) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    single = inputs.ndim == 1
    pred, _ = _forward(model.params, np.atleast_2d(inputs))
    return pred[0] if single else pred


def loss_and_grads(params, inputs, targets):
    """Mean squared error over the batch and its exact gradient."""
    pred, (x, h0, hs, cs, gates) = _forward(params, inputs)
    diff = pred - targets
    loss = float(np.mean(diff * diff))
    dpred = 2.0 * diff / diff.size
    dhs = np.zeros_like(hs)
    dhs[-1] = dpred @ params["w_out"].T
    _, dwx, dwh, db = lstm_backward(dhs, x, params["wx"], np.ascontiguousarray(params["wh"]), h0, h0, hs, cs, gates)
    grads = {"wx": dwx, "wh": dwh, "b": db, "w_out": hs[-1].T @ dpred, "b_out": dpred.sum(axis=0)}
    return loss, grads


def mse_loss(params, inputs, targets) -> float:
    pred, _ = _forward(params, inputs)
    return float(np.mean((pred - targets) ** 2))


@dataclass
class TrainReport:
    train_loss: list[float]
    val_loss: list[float]
    selected_epoch: int
    wall_time: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "selected"])
            for e, (tl, vl) in enumerate(zip(self.train_loss, self.val_loss)):
                w.writerow([e, repr(tl), repr(vl), int(e == self.selected_epoch)])


def train_forecaster(windows: Windows, cfg: TrainConfig | None = None, seed: int = 0) -> tuple[ForecastModel, TrainReport]:
    """Adam on minibatch MSE with early stopping on a held-out 10% of ``windows``.

    The returned model carries the parameters of the epoch with the lowest
    validation loss.
    """
    cfg = cfg or TrainConfig()
    n = len(windows)
    if n < 2:
        raise ValueError("need at least 2 windows to train")
    rng = np.random.default_rng(seed)
    model = ForecastModel.init(cfg.hidden, windows.targets.shape[1], rng, cfg)

    perm = rng.permutation(n)
    n_val = min(n - 1, max(1, int(round(cfg.val_fraction * n))))
    val_idx, tr_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    xtr, ytr = windows.inputs[tr_idx], windows.targets[tr_idx]
    xva, yva = windows.inputs[val_idx], windows.targets[val_idx]

    opt = Adam(model.params, lr=cfg.lr)
    best = np.inf
    best_params = {k: v.copy() for k, v in model.params.items()}
    best_epoch = 0
    train_hist: list[float] = []
    val_hist: list[float] = []
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        total = 0.0
        for idx in minibatches(rng, len(tr_idx), cfg.batch_size):
            loss, grads = loss_and_grads(model.params, xtr[idx], ytr[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"training loss became {loss} at epoch {epoch}")
            opt.step(grads)
            total += loss * idx.size
        train_hist.append(total / len(tr_idx))
        vl = mse_loss(model.params, xva, yva)
        if not np.isfinite(vl):
            raise NonFiniteLoss(f"validation loss became {vl} at epoch {epoch}")
        val_hist.append(vl)
        if vl < best:
            best, best_epoch = vl, epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
        elif epoch - best_epoch >= cfg.patience:
            break
    model.params = best_params
    return model, TrainReport(train_hist, val_hist, best_epoch, time.perf_counter() - t0)

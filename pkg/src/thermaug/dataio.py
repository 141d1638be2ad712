"""Series records, CSV I/O, scaling, per-phase splitting and subsampling.

The on-disk layout is one row per minute::

    phase,step,flag,sp_ec3,sp_sb43,sp_b46,sp_sb47,minute,target[,label]

Setpoints of switched-off actuators are written as ``nan``. Floats are
written with ``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateData,
    DuplicateKey,
    EmptyDataset,
    MissingColumn,
    NonDivisibleFactor,
    NonFiniteValue,
    RaggedSeries,
)
from .seeding import derive_seed

SERIES_LENGTH = 240
SETPOINT_COLUMNS = ("sp_ec3", "sp_sb43", "sp_b46", "sp_sb47")
DEFAULT_SCHEMA: dict[str, str] = {
    "phase": "phase",
    "step": "step",
    "flag": "flag",
    "sp_ec3": "sp_ec3",
    "sp_sb43": "sp_sb43",
    "sp_b46": "sp_b46",
    "sp_sb47": "sp_sb47",
    "minute": "minute",
    "target": "target",
    "label": "label",
}
REQUIRED_FIELDS = ("phase", "step", "flag", *SETPOINT_COLUMNS, "minute", "target")


@dataclass(frozen=True)
class SeriesRecord:
    """One 4-hour acquisition of the room-centre temperature."""

    phase: int
    step: int
    flag: int
    setpoints: tuple[float, float, float, float]
    values: np.ndarray = field(repr=False)
    label: int | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (SERIES_LENGTH,):
            raise RaggedSeries(f"series ({self.phase}, {self.step}) has shape {values.shape}, expected ({SERIES_LENGTH},)")
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue(f"series ({self.phase}, {self.step}) contains non-finite values")
        if self.flag not in (0, 1):
            raise ValueError(f"flag must be 0 or 1, got {self.flag}")
        if self.label is not None and self.label not in (0, 1, 2):
            raise ValueError(f"label must be 0, 1 or 2, got {self.label}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "setpoints", tuple(float(s) for s in self.setpoints))

    @property
    def key(self) -> tuple[int, int]:
        return (self.phase, self.step)

    @property
    def included(self) -> bool:
        return self.flag == 1

    def with_label(self, label: int | None) -> "SeriesRecord":
        return SeriesRecord(self.phase, self.step, self.flag, self.setpoints, self.values, label)


@dataclass(frozen=True)
class StandardScaler:
    mean: float
    std: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.std)) or self.std <= 0:
            raise DegenerateData(f"scaler needs finite mean and positive std, got ({self.mean}, {self.std})")

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def invert(self, x):
        return np.asarray(x, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[SeriesRecord, ...]
    test: tuple[SeriesRecord, ...]
    scaler: StandardScaler
    split_seed: int
    fraction: float = 0.2

    def train_keys(self) -> set[tuple[int, int]]:
        return {r.key for r in self.train}

    def test_keys(self) -> set[tuple[int, int]]:
        return {r.key for r in self.test}

    def phase_counts(self) -> dict[int, dict[str, int]]:
        counts: dict[int, dict[str, int]] = {}
        for name, recs in (("train", self.train), ("test", self.test)):
            for r in recs:
                counts.setdefault(r.phase, {"train": 0, "test": 0})[name] += 1
        return dict(sorted(counts.items()))

    def manifest(self) -> dict:
        return {
            "split_seed": self.split_seed,
            "fraction": self.fraction,
            "n_train": len(self.train),
            "n_test": len(self.test),
            "per_phase": {str(p): c for p, c in self.phase_counts().items()},
            "scaler": self.scaler.to_dict(),
            "train_keys": [list(k) for k in sorted(self.train_keys())],
            "test_keys": [list(k) for k in sorted(self.test_keys())],
        }


# --------------------------------------------------------------------------- CSV


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(records: Iterable[SeriesRecord], path, *, with_labels: bool | None = None) -> None:
    records = list(records)
    if with_labels is None:
        with_labels = any(r.label is not None for r in records)
    header = list(REQUIRED_FIELDS) + (["label"] if with_labels else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in sorted(records, key=lambda r: r.key):
            sp = [_fmt(s) for s in r.setpoints]
            lab = [] if not with_labels else ["" if r.label is None else str(r.label)]
            for minute, v in enumerate(r.values):
                w.writerow([r.phase, r.step, r.flag, *sp, minute, _fmt(v), *lab])


def ingest_csv(path, schema: Mapping[str, str] | None = None) -> list[SeriesRecord]:
    """Read one record per (phase, step) group. Flag-0 groups are kept."""
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        cols.update(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file") from None
        pos = {name: i for i, name in enumerate(header)}
        for f in REQUIRED_FIELDS:
            if cols[f] not in pos:
                raise MissingColumn(f"{path}: missing column {cols[f]!r}")
        label_pos = pos.get(cols["label"])
        ip = {f: pos[cols[f]] for f in REQUIRED_FIELDS}

        groups: dict[tuple[int, int], dict] = {}
        order: list[tuple[int, int]] = []
        last_key = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            key = (int(row[ip["phase"]]), int(row[ip["step"]]))
            if key != last_key:
                if key in groups:
                    raise DuplicateKey(f"{path}:{lineno}: (phase, step) {key} appears in two separate blocks")
                groups[key] = {
                    "flag": int(row[ip["flag"]]),
                    "setpoints": tuple(float(row[ip[c]]) for c in SETPOINT_COLUMNS),
                    "minutes": [],
                    "values": [],
                    "label": None,
                }
                order.append(key)
                last_key = key
            g = groups[key]
            v = float(row[ip["target"]])
            if not math.isfinite(v):
                raise NonFiniteValue(f"{path}:{lineno}: non-finite target value {row[ip['target']]!r}")
            g["minutes"].append(int(row[ip["minute"]]))
            g["values"].append(v)
            if label_pos is not None and row[label_pos] != "":
                g["label"] = int(row[label_pos])

    out = []
    for key in order:
        g = groups[key]
        if len(g["values"]) != SERIES_LENGTH:
            raise RaggedSeries(f"{path}: series {key} has {len(g['values'])} rows, expected {SERIES_LENGTH}")
        if g["minutes"] != list(range(SERIES_LENGTH)):
            raise RaggedSeries(f"{path}: series {key} minutes are not 0..{SERIES_LENGTH - 1} in order")
        out.append(SeriesRecord(key[0], key[1], g["flag"], g["setpoints"], np.array(g["values"]), g["label"]))
    return out


def included(records: Iterable[SeriesRecord]) -> list[SeriesRecord]:
    return [r for r in records if r.included]


# ---------------------------------------------------------------- scaling, split


def fit_scaler(train: Sequence[SeriesRecord]) -> StandardScaler:
    if not train:
        raise EmptyDataset("cannot fit a scaler on an empty train set")
    flat = np.concatenate([r.values for r in train])
    std = float(flat.std())
    if not std > 0:
        raise DegenerateData("train values have zero variance")
    return StandardScaler(float(flat.mean()), std)


def holdout_size(n: int, fraction: float, rounding: str = "round") -> int:
    """Test-set size for a phase of ``n`` included series."""
    if n == 0:
        return 0
    raw = fraction * n
    if rounding == "round":
        k = math.floor(raw + 0.5)  # half up, not Python's half-to-even
    elif rounding == "ceil":
        k = math.ceil(raw - 1e-12)
    else:
        raise ValueError(f"unknown rounding {rounding!r}")
    return max(1, k)


def split_by_phase(
    records: Sequence[SeriesRecord],
    fraction: float = 0.2,
    seed: int = 0,
    *,
    shuffle: bool = True,
    rounding: str = "round",
) -> DatasetSplit:
    """Hold out ``holdout_size(n_p)`` series per phase.

    With ``shuffle`` the phase is permuted with a per-phase seed and the tail
    goes to test; otherwise the chronologically last steps do.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    recs = included(records)
    if not recs:
        raise EmptyDataset("no included series to split")
    keys = [r.key for r in recs]
    if len(set(keys)) != len(keys):
        raise DuplicateKey("duplicate (phase, step) keys in input")

    by_phase: dict[int, list[SeriesRecord]] = {}
    for r in sorted(recs, key=lambda r: r.key):
        by_phase.setdefault(r.phase, []).append(r)

    train: list[SeriesRecord] = []
    test: list[SeriesRecord] = []
    for phase, group in sorted(by_phase.items()):
        k = holdout_size(len(group), fraction, rounding)
        if shuffle:
            rng = np.random.default_rng(derive_seed(seed, "split", phase))
            group = [group[i] for i in rng.permutation(len(group))]
        train.extend(group[: len(group) - k])
        test.extend(group[len(group) - k :])

    train.sort(key=lambda r: r.key)
    test.sort(key=lambda r: r.key)
    return DatasetSplit(tuple(train), tuple(test), fit_scaler(train), int(seed), float(fraction))


def write_split_manifest(split: DatasetSplit, path) -> None:
    Path(path).write_text(json.dumps(split.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_split(records: Sequence[SeriesRecord], manifest_path) -> DatasetSplit:
    """Rebuild a split from a dataset and a manifest written by :func:`write_split_manifest`."""
    m = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    by_key = {r.key: r for r in records}
    try:
        train = tuple(by_key[tuple(k)] for k in m["train_keys"])
        test = tuple(by_key[tuple(k)] for k in m["test_keys"])
    except KeyError as exc:
        raise MissingColumn(f"split manifest references series {exc.args[0]} absent from the dataset") from None
    scaler = StandardScaler(m["scaler"]["mean"], m["scaler"]["std"])
    return DatasetSplit(train, test, scaler, int(m["split_seed"]), float(m["fraction"]))


# ------------------------------------------------------------------ subsampling


def subsample(series, factor: int = 10, mode: str = "stride") -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if factor < 1 or x.shape[-1] % factor:
        raise NonDivisibleFactor(f"factor {factor} does not divide series length {x.shape[-1]}")
    if mode == "stride":
        return x[..., ::factor].copy()
    if mode == "mean":
        return x.reshape(*x.shape[:-1], -1, factor).mean(axis=-1)
    raise ValueError(f"unknown subsample mode {mode!r}")


def values_matrix(records: Sequence[SeriesRecord]) -> np.ndarray:
    if not records:
        return np.empty((0, SERIES_LENGTH))
    return np.stack([r.values for r in records])


def labels_array(records: Sequence[SeriesRecord]) -> np.ndarray:
    return np.array([-1 if r.label is None else r.label for r in records], dtype=np.int64)

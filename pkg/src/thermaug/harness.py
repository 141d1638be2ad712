"""Utility experiments: train-real / train-synthetic comparisons and class ablation.

Experiment 1 trains forecasters on three compositions of the training set
(real only, synthetic only, real plus synthetic) and scores all of them on
the real test split. Experiment 2 removes part of one trend class, refits a
synthesizer on what is left, and compares forecasters trained on the
reduced set against forecasters trained on the reduced set topped up with
class-conditioned samples.

Every forecaster seed and every synthetic draw comes from
:func:`thermaug.seeding.derive_seed` keyed by experiment, arm and run, so a
manifest is a pure function of (data, config, base seed) and does not
depend on ``jobs``.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataio import DatasetSplit, labels_array, values_matrix
from .errors import ClassTooSmall, EmptyArm, LeakageError, NonFiniteLoss
from .forecaster import TrainConfig, Windows, predict, train_forecaster, windows_from_records, windows_from_scaled
from .metrics import METRIC_NAMES, evaluate, trim_outliers
from .seeding import derive_seed, rng_for
from .synth import CLASSES, Synthesizer, make_synth

DEFAULT_RATIOS = (0.25, 0.5, 0.75, 1.0)
HIST_BINS = 20


class Strategy(str, Enum):
    TRTR = "trtr"  # train real, test real
    TSTR = "tstr"  # train synthetic, test real
    TRSTR = "trstr"  # train real + synthetic, test real


@dataclass(frozen=True)
class AblationSpec:
    class_index: int
    ratio: float
    n_init: int

    def __post_init__(self):
        if self.class_index not in CLASSES:
            raise ValueError(f"class_index must be one of {CLASSES}")
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        if self.n_init < 0:
            raise ValueError("n_init must be non-negative")

    @property
    def n_ablated(self) -> int:
        # half-up rounding; Python's round() would send 2.5 to 2
        return int(math.floor(self.ratio * self.n_init + 0.5))

    @property
    def n_missing(self) -> int:
        return self.n_init - self.n_ablated

    @property
    def tag(self) -> str:
        return f"c{self.class_index}_r{self.ratio:g}"


@dataclass
class ExperimentManifest:
    experiment: str
    seed: int
    runs: int
    arms: list[str]
    grid: dict
    config: dict
    dataset: dict
    rows: list[dict] = field(default_factory=list)
    scenarios: list[dict] = field(default_factory=list)

    @property
    def aggregates(self) -> dict:
        return aggregate(self)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["aggregates"] = self.aggregates
        return d

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=1) + "\n"


def _jsonable(obj):
    # JSON has no NaN; write null so the file stays standard
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


# ----------------------------------------------------------------- training jobs


def _fit_and_score(job):
    """Worker body: one forecaster. Kept top-level so process pools can pickle it."""
    arm, run, train_w, test_w, cfg, seed, extra = job
    row = {"arm": arm, "run": run, "seed": seed, "train_size": len(train_w), **extra}
    try:
        model, report = train_forecaster(train_w, cfg, seed)
    except NonFiniteLoss as exc:
        row.update(status="failed", error=f"NonFiniteLoss: {exc}", selected_epoch=-1)
        row.update({m: float("nan") for m in METRIC_NAMES})
        return row
    bundle = evaluate(test_w.targets, predict(model, test_w.inputs))
    row.update(status="ok", error="", selected_epoch=report.selected_epoch)
    row.update({m: getattr(bundle, m) for m in METRIC_NAMES})
    row.update(mape_skipped=bundle.mape_skipped, mase_skipped=bundle.mase_skipped)
    return row


def _run_jobs(jobs: list, n_workers: int) -> list[dict]:
    if n_workers <= 1 or len(jobs) <= 1:
        rows = [_fit_and_score(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_fit_and_score, jobs, chunksize=1))
    return sorted(rows, key=lambda r: (r["arm"], r["run"]))


def check_no_leakage(train_keys, test_keys) -> None:
    overlap = set(train_keys) & set(test_keys)
    if overlap:
        raise LeakageError(f"{len(overlap)} test series reached a training set, e.g. {sorted(overlap)[:3]}")


def limit_train(split: DatasetSplit, n: int | None, seed: int = 0) -> DatasetSplit:
    """Copy of ``split`` keeping a seeded subset of ``n`` train series (order preserved)."""
    if n is None or n >= len(split.train):
        return split
    if n < 2:
        raise ValueError("need at least 2 train series")
    keep = np.sort(rng_for(seed, "train_limit").choice(len(split.train), size=n, replace=False))
    return DatasetSplit(tuple(split.train[i] for i in keep), split.test, split.scaler, split.split_seed, split.fraction)


def _dataset_summary(split: DatasetSplit) -> dict:
    return {
        "n_train": len(split.train),
        "n_test": len(split.test),
        "train_keys": [list(k) for k in sorted(split.train_keys())],
        "test_keys": [list(k) for k in sorted(split.test_keys())],
        "train_labels": np.bincount(labels_array(split.train)[labels_array(split.train) >= 0], minlength=3).tolist(),
        "scaler": split.scaler.to_dict(),
    }


def _synth_windows(samples, tag, cfg: TrainConfig) -> Windows:
    keys = [("synth", tag, j) for j in range(samples.shape[0])]
    return windows_from_scaled(samples, keys, cfg)


# ------------------------------------------------------------------ experiment 1


def run_exp1(
    split: DatasetSplit,
    synth: Synthesizer,
    runs: int = 100,
    synth_n: int = 256,
    seed: int = 0,
    cfg: TrainConfig | None = None,
    jobs: int = 1,
    strategies: Sequence[Strategy] = tuple(Strategy),
) -> ExperimentManifest:
    """Train ``runs`` forecasters per strategy and score them on ``split.test``.

    ``synth`` must already be fitted on ``split.train``. TSTR and TRSTR in the
    same run share one fresh unconditional draw of ``synth_n`` series.
    """
    cfg = cfg or TrainConfig()
    if runs < 1 or synth_n < 0:
        raise ValueError("runs must be >= 1 and synth_n >= 0")
    strategies = [Strategy(s) for s in strategies]
    if synth_n == 0 and Strategy.TSTR in strategies:
        raise ValueError("TSTR needs synth_n > 0")
    real_w = windows_from_records(split.train, split.scaler, cfg)
    test_w = windows_from_records(split.test, split.scaler, cfg)
    test_keys = split.test_keys()
    check_no_leakage(real_w.keys, test_keys)

    job_list = []
    for run in range(runs):
        synth_w = None
        if Strategy.TSTR in strategies or Strategy.TRSTR in strategies:
            samples = synth.sample(synth_n, None, derive_seed(seed, "exp1", "synth", run))
            synth_w = _synth_windows(samples, run, cfg)
        for strat in strategies:
            if strat is Strategy.TRTR:
                train_w = real_w
            elif strat is Strategy.TSTR:
                train_w = synth_w
            else:
                train_w = real_w.concat(synth_w)
                assert len(train_w) == len(real_w) + len(synth_w)
            check_no_leakage(train_w.keys, test_keys)
            job_list.append((strat.value, run, train_w, test_w, cfg, derive_seed(seed, "exp1", strat.value, run), {}))

    manifest = ExperimentManifest(
        experiment="exp1",
        seed=seed,
        runs=runs,
        arms=[s.value for s in strategies],
        grid={"synth_n": synth_n, "strategies": [s.value for s in strategies], "synth_kind": synth.kind},
        config={"train": asdict(cfg)},
        dataset=_dataset_summary(split),
    )
    manifest.rows = _run_jobs(job_list, jobs)
    return manifest


# ------------------------------------------------------------------ experiment 2


def ablate(split: DatasetSplit, spec: AblationSpec, seed: int):
    """Indices (into ``split.train``) kept and removed for one scenario."""
    labels = labels_array(split.train)
    members = np.flatnonzero(labels == spec.class_index)
    rng = rng_for(seed, "exp2", "ablate", spec.class_index, repr(spec.ratio))
    removed = np.sort(rng.choice(members, size=spec.n_missing, replace=False))
    kept = np.setdiff1d(np.arange(len(split.train)), removed)
    return kept, removed


def run_exp2(
    split: DatasetSplit,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    runs: int = 100,
    seed: int = 0,
    synth_factory: Callable[[], Synthesizer] | None = None,
    cfg: TrainConfig | None = None,
    jobs: int = 1,
    classes: Sequence[int] = CLASSES,
    synth_config: dict | None = None,
) -> ExperimentManifest:
    """Class-ablation study: one synthesizer per (class, ratio) scenario.

    For each scenario the baseline arm trains on the reduced set and the
    augmented arm on the reduced set plus ``n_missing`` fresh class-``i``
    samples per run. Both arms use distinct forecaster seed streams.
    """
    cfg = cfg or TrainConfig()
    if runs < 1:
        raise ValueError("runs must be >= 1")
    synth_factory = synth_factory or (lambda: make_synth("vqvae"))
    labels = labels_array(split.train)
    if np.any(labels < 0):
        raise ValueError("exp2 needs every train series labeled")
    full_counts = np.bincount(labels, minlength=3)
    x_train = split.scaler.apply(values_matrix(split.train))
    test_w = windows_from_records(split.test, split.scaler, cfg)
    test_keys = split.test_keys()
    check_no_leakage(split.train_keys(), test_keys)

    job_list, scenarios, arms = [], [], []
    for i in classes:
        if full_counts[i] == 0:
            raise ClassTooSmall(f"class {i} has no train series to ablate")
        for r in ratios:
            spec = AblationSpec(int(i), float(r), int(full_counts[i]))
            kept, removed = ablate(split, spec, seed)
            reduced = [split.train[k] for k in kept]
            reduced_w = windows_from_records(reduced, split.scaler, cfg)
            check_no_leakage(reduced_w.keys, test_keys)

            synth = synth_factory()
            synth.fit(x_train[kept], labels[kept], seed=derive_seed(seed, "exp2", "synth", spec.tag))
            counts_reduced = np.bincount(labels[kept], minlength=3)
            counts_aug = counts_reduced.copy()
            counts_aug[i] += spec.n_missing
            if not np.array_equal(counts_aug, full_counts):
                raise AssertionError(f"{spec.tag}: augmented counts {counts_aug} != {full_counts}")
            scenarios.append({
                "tag": spec.tag,
                "class_index": spec.class_index,
                "ratio": spec.ratio,
                "n_init": spec.n_init,
                "n_ablated": spec.n_ablated,
                "n_missing": spec.n_missing,
                "removed_keys": [list(split.train[k].key) for k in removed],
                "counts_full": full_counts.tolist(),
                "counts_reduced": counts_reduced.tolist(),
                "counts_augmented": counts_aug.tolist(),
                "synth_kind": synth.kind,
            })
            base_arm, aug_arm = f"{spec.tag}_baseline", f"{spec.tag}_augmented"
            arms += [base_arm, aug_arm]
            extra = {"class_index": spec.class_index, "ratio": spec.ratio, "n_missing": spec.n_missing}
            for run in range(runs):
                samples = synth.sample(spec.n_missing, i, derive_seed(seed, "exp2", "sample", spec.tag, run))
                aug_w = reduced_w.concat(_synth_windows(samples, (spec.tag, run), cfg))
                check_no_leakage(aug_w.keys, test_keys)
                job_list.append((base_arm, run, reduced_w, test_w, cfg,
                                 derive_seed(seed, "exp2", base_arm, run), extra))
                job_list.append((aug_arm, run, aug_w, test_w, cfg,
                                 derive_seed(seed, "exp2", aug_arm, run), extra))

    manifest = ExperimentManifest(
        experiment="exp2",
        seed=seed,
        runs=runs,
        arms=arms,
        grid={"ratios": [float(r) for r in ratios], "classes": [int(c) for c in classes],
              "n_synthesizers": len(scenarios)},
        config={"train": asdict(cfg), "synth": synth_config or {}},
        dataset=_dataset_summary(split),
        scenarios=scenarios,
    )
    manifest.rows = _run_jobs(job_list, jobs)
    return manifest


# ------------------------------------------------------------------- aggregation


def aggregate(manifest_or_rows, arms: Sequence[str] | None = None) -> dict:
    """Per-arm mean and sample std (ddof 1) of every metric over successful runs.

    With a single successful run the std is reported as 0 and ``degenerate``
    is set. NaN metric values (undefined MAPE/MASE) are left out of that
    metric's statistics and counted in ``<metric>_n``.
    """
    if isinstance(manifest_or_rows, ExperimentManifest):
        rows = manifest_or_rows.rows
        arms = arms or manifest_or_rows.arms
    else:
        rows = list(manifest_or_rows)
        arms = arms or sorted({r["arm"] for r in rows})
    out = {}
    for arm in arms:
        arm_rows = [r for r in rows if r["arm"] == arm]
        ok = [r for r in arm_rows if r.get("status", "ok") == "ok"]
        if not ok:
            raise EmptyArm(f"arm {arm!r} has no successful runs")
        entry = {"n": len(ok), "failed": len(arm_rows) - len(ok), "degenerate": len(ok) == 1}
        for m in METRIC_NAMES:
            v = np.array([r[m] for r in ok], dtype=np.float64)
            v = v[np.isfinite(v)]
            entry[f"{m}_n"] = int(v.size)
            entry[f"{m}_mean"] = float(np.mean(v)) if v.size else float("nan")
            entry[f"{m}_std"] = float(np.std(v, ddof=1)) if v.size > 1 else 0.0 if v.size else float("nan")
        out[arm] = entry
    return out


# ----------------------------------------------------------------------- outputs

ROW_FIELDS = ("arm", "run", "status", "seed", "train_size", "selected_epoch") + METRIC_NAMES


def write_rows(manifest: ExperimentManifest, path) -> None:
    extra = sorted({k for r in manifest.rows for k in r} - set(ROW_FIELDS) - {"error"})
    fields = list(ROW_FIELDS) + extra + ["error"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in manifest.rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def write_aggregates(manifest: ExperimentManifest, path) -> None:
    agg = aggregate(manifest)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arm", "metric", "mean", "std", "n", "failed", "degenerate"])
        for arm, e in agg.items():
            for m in METRIC_NAMES:
                w.writerow([arm, m, repr(e[f"{m}_mean"]), repr(e[f"{m}_std"]), e[f"{m}_n"], e["failed"], int(e["degenerate"])])


def write_histograms(manifest: ExperimentManifest, outdir, trim_fraction: float = 0.05, bins: int = HIST_BINS) -> list[Path]:
    """One ``hist_<metric>.csv`` per metric: per-arm counts over shared bins after trimming."""
    paths = []
    for m in METRIC_NAMES:
        per_arm = {}
        for arm in manifest.arms:
            v = np.array([r[m] for r in manifest.rows if r["arm"] == arm and r["status"] == "ok"], dtype=np.float64)
            per_arm[arm] = trim_outliers(v[np.isfinite(v)], trim_fraction)
        pooled = np.concatenate(list(per_arm.values())) if per_arm else np.empty(0)
        path = Path(outdir) / f"hist_{m}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["arm", "bin_left", "bin_right", "count"])
            if pooled.size:
                edges = np.histogram_bin_edges(pooled, bins=bins)
                for arm, v in per_arm.items():
                    counts, _ = np.histogram(v, bins=edges)
                    for k, c in enumerate(counts):
                        w.writerow([arm, repr(float(edges[k])), repr(float(edges[k + 1])), int(c)])
        paths.append(path)
    return paths


def write_outputs(manifest: ExperimentManifest, outdir, trim_fraction: float = 0.05) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"manifest": outdir / "manifest.json", "rows": outdir / "rows.csv", "aggregates": outdir / "aggregates.csv"}
    paths["manifest"].write_text(manifest.to_json(), encoding="utf-8")
    write_rows(manifest, paths["rows"])
    write_aggregates(manifest, paths["aggregates"])
    for p in write_histograms(manifest, outdir, trim_fraction):
        paths[p.stem] = p
    return paths


def load_manifest(path) -> ExperimentManifest:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    d.pop("aggregates", None)
    for r in d["rows"]:
        for m in METRIC_NAMES:
            if r.get(m) is None:
                r[m] = float("nan")
    return ExperimentManifest(**d)

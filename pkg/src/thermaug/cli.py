"""Command-line entry point: ``thermaug <subcommand> [options]``.

Typical pipeline::

    thermaug simulate --out data.csv --seed 7
    thermaug label --data data.csv --out labeled.csv
    thermaug split --data labeled.csv --out split.json
    thermaug train-synth --data labeled.csv --split split.json --out synth.ckpt
    thermaug exp1 --data labeled.csv --split split.json --synth synth.ckpt --out exp1/
    thermaug report --exp exp1/

All randomness flows from ``--seed`` (default: $THERMAUG_SEED, else 0).
``--config`` reads a JSON or YAML file with optional sections ``sim``,
``label``, ``split``, ``synth``, ``train``, ``exp1``, ``exp2`` and ``tsne``;
explicit flags win over the file. Each run writes a ``*.run.json`` (or
``run.json`` inside output directories) echoing the resolved settings.
Exit status: 0 on success, 2 on usage errors, 1 on any module error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from . import dataio, diagnostics, harness
from ._accel import backend
from .errors import OutputExists, ThermaugError
from .forecaster import TrainConfig, make_windows, predict, train_forecaster
from .labeling import EPS_NET, EPS_SLOPE, label_records
from .metrics import METRIC_NAMES, evaluate
from .sim import SimConfig, generate_rico_like
from .synth import KINDS, load_synth, make_synth

SEED_ENV = "THERMAUG_SEED"


# ---------------------------------------------------------------------- helpers


def _default_seed() -> int | None:
    raw = os.environ.get(SEED_ENV, "")
    if raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        return None


def _load_config(path) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return data


def _section(args, name) -> dict:
    return dict(args.config_data.get(name) or {})


def _pick(args, flag: str, section: dict, key: str, default):
    """Flag value if given, else the config-file value, else the default."""
    v = getattr(args, flag, None)
    if v is not None:
        return v
    return section.get(key, default)


def _claim(args, path) -> Path:
    """Refuse to overwrite ``path`` unless ``--force``."""
    p = Path(path)
    if p.exists() and not args.force:
        raise OutputExists(f"{p} exists; pass --force to overwrite")
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _claim_dir(args, path) -> Path:
    p = Path(path)
    if p.exists() and any(p.iterdir()) and not args.force:
        raise OutputExists(f"{p} is not empty; pass --force to overwrite")
    p.mkdir(parents=True, exist_ok=True)
    return p


def _echo(args, path: Path, resolved: dict) -> None:
    record = {
        "command": args.command,
        "seed": args.seed,
        "backend": backend(),
        "resolved": resolved,
    }
    path.write_text(json.dumps(harness._jsonable(record), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_json_for(out: Path) -> Path:
    return out.with_name(out.name + ".run.json")


def _load_data_split(args):
    records = dataio.ingest_csv(args.data)
    return records, dataio.load_split(records, args.split)


def _train_config(args) -> TrainConfig:
    sec = _section(args, "train")
    for f in ("epochs", "hidden", "lr", "batch_size", "patience", "input_len", "window_step"):
        v = getattr(args, f"train_{f}", None)
        if v is not None:
            sec[f] = v
    return TrainConfig.from_dict(sec)


def _synth_params(args) -> tuple[str, dict]:
    sec = _section(args, "synth")
    kind = _pick(args, "kind", sec, "kind", "vqvae")
    params = {k: v for k, v in sec.items() if k != "kind"}
    for f in ("vq_epochs", "prior_epochs"):
        v = getattr(args, f, None)
        if v is not None:
            params[f] = v
    if kind != "vqvae":
        params.pop("vq_epochs", None)
        params.pop("prior_epochs", None)
    return kind, params


def _write_matrix(path, x, labels=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "class"] + [f"v{j}" for j in range(x.shape[1])])
        for i, row in enumerate(x):
            cls = "" if labels is None or labels[i] is None else int(labels[i])
            w.writerow([i, cls] + [repr(float(v)) for v in row])


def _read_matrix(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[float(v) for v in r[2:]] for r in rows])


# ------------------------------------------------------------------ subcommands


def cmd_simulate(args) -> None:
    sec = _section(args, "sim")
    sec["seed"] = args.seed
    if args.noise_std is not None:
        sec["noise_std"] = args.noise_std
    cfg = SimConfig.from_dict(sec)
    out = _claim(args, args.out)
    records = generate_rico_like(cfg)
    dataio.write_csv(records, out, with_labels=False)
    _echo(args, _run_json_for(out), {"sim": cfg.to_dict(), "n_series": len(records), "out": str(out)})
    print(f"wrote {len(records)} series to {out}")


def cmd_label(args) -> None:
    sec = _section(args, "label")
    eps_slope = _pick(args, "eps_slope", sec, "eps_slope", EPS_SLOPE)
    eps_net = _pick(args, "eps_net", sec, "eps_net", EPS_NET)
    # without --out the dataset is annotated in place
    out = _claim(args, args.out) if args.out is not None else Path(args.data)
    records = label_records(dataio.ingest_csv(args.data), eps_slope, eps_net)
    dataio.write_csv(records, out, with_labels=True)
    counts = np.bincount([r.label for r in records], minlength=3).tolist()
    _echo(args, _run_json_for(out), {"eps_slope": eps_slope, "eps_net": eps_net, "data": str(args.data),
                                     "class_counts": counts})
    print(f"labeled {len(records)} series, class counts {counts}")


def cmd_split(args) -> None:
    sec = _section(args, "split")
    fraction = _pick(args, "fraction", sec, "fraction", 0.2)
    rounding = _pick(args, "rounding", sec, "rounding", "round")
    shuffle = False if args.chronological else sec.get("shuffle", True)
    out = _claim(args, args.out)
    split = dataio.split_by_phase(dataio.ingest_csv(args.data), fraction, args.seed,
                                  shuffle=shuffle, rounding=rounding)
    dataio.write_split_manifest(split, out)
    _echo(args, _run_json_for(out), {"fraction": fraction, "rounding": rounding, "shuffle": shuffle,
                                     "data": str(args.data), "n_train": len(split.train), "n_test": len(split.test)})
    print(f"train {len(split.train)} / test {len(split.test)}")


def cmd_train_synth(args) -> None:
    kind, params = _synth_params(args)
    out = _claim(args, args.out)
    _, split = _load_data_split(args)
    x = split.scaler.apply(dataio.values_matrix(split.train))
    labels = dataio.labels_array(split.train)
    labels = None if np.any(labels < 0) else labels
    harness.check_no_leakage(split.train_keys(), split.test_keys())
    synth = make_synth(kind, **params).fit(x, labels, seed=args.seed)
    synth.save(out)
    _echo(args, _run_json_for(out), {"kind": kind, "params": params, "n_train": x.shape[0], "data": str(args.data)})
    print(f"fitted {kind} synthesizer on {x.shape[0]} series -> {out}")


def cmd_sample(args) -> None:
    out = _claim(args, args.out)
    synth = load_synth(args.model)
    x = synth.sample(args.n, args.cls, seed=args.seed)
    units = "scaled"
    if args.split is not None:
        m = json.loads(Path(args.split).read_text(encoding="utf-8"))
        x = dataio.StandardScaler(m["scaler"]["mean"], m["scaler"]["std"]).invert(x)
        units = "degC"
    _write_matrix(out, x, [args.cls] * x.shape[0])
    _echo(args, _run_json_for(out), {"model": str(args.model), "n": args.n, "class": args.cls, "units": units})
    print(f"wrote {x.shape[0]} samples ({units}) to {out}")


def cmd_train_forecaster(args) -> None:
    cfg = _train_config(args)
    out = _claim(args, args.out)
    _, split = _load_data_split(args)
    train_w, test_w = make_windows(split, cfg)
    harness.check_no_leakage(train_w.keys, split.test_keys())
    model, report = train_forecaster(train_w, cfg, seed=args.seed)
    model.save(out)
    if args.report is not None:
        report.write_csv(_claim(args, args.report))
    bundle = evaluate(test_w.targets, predict(model, test_w.inputs))
    _echo(args, _run_json_for(out), {"train": asdict(cfg), "selected_epoch": report.selected_epoch,
                                     "test_metrics": bundle.to_dict()})
    print(" ".join(f"{m}={getattr(bundle, m):.6g}" for m in METRIC_NAMES))


def cmd_exp1(args) -> None:
    sec = _section(args, "exp1")
    runs = _pick(args, "runs", sec, "runs", 100)
    synth_n = _pick(args, "synth_n", sec, "synth_n", 256)
    train_limit = _pick(args, "train_limit", sec, "train_limit", None)
    cfg = _train_config(args)
    outdir = _claim_dir(args, args.out)
    _, split = _load_data_split(args)
    split = harness.limit_train(split, train_limit, args.seed)
    if args.synth is not None:
        synth = load_synth(args.synth)
        synth_desc = {"checkpoint": str(args.synth)}
    else:
        kind, params = _synth_params(args)
        x = split.scaler.apply(dataio.values_matrix(split.train))
        labels = dataio.labels_array(split.train)
        synth = make_synth(kind, **params).fit(x, None if np.any(labels < 0) else labels, seed=args.seed)
        synth_desc = {"kind": kind, "params": params}
    manifest = harness.run_exp1(split, synth, runs=runs, synth_n=synth_n, seed=args.seed, cfg=cfg, jobs=args.jobs)
    harness.write_outputs(manifest, outdir)
    _echo(args, outdir / "run.json", {"runs": runs, "synth_n": synth_n, "train_limit": train_limit,
                                      "train": asdict(cfg), "synth": synth_desc, "jobs": args.jobs})
    _print_aggregates(manifest)


def cmd_exp2(args) -> None:
    sec = _section(args, "exp2")
    runs = _pick(args, "runs", sec, "runs", 100)
    ratios = _pick(args, "ratios", sec, "ratios", list(harness.DEFAULT_RATIOS))
    train_limit = _pick(args, "train_limit", sec, "train_limit", None)
    cfg = _train_config(args)
    kind, params = _synth_params(args)
    outdir = _claim_dir(args, args.out)
    _, split = _load_data_split(args)
    split = harness.limit_train(split, train_limit, args.seed)
    manifest = harness.run_exp2(split, ratios=ratios, runs=runs, seed=args.seed,
                                synth_factory=lambda: make_synth(kind, **params), cfg=cfg, jobs=args.jobs,
                                synth_config={"kind": kind, **params})
    harness.write_outputs(manifest, outdir)
    _echo(args, outdir / "run.json", {"runs": runs, "ratios": ratios, "train_limit": train_limit,
                                      "train": asdict(cfg), "synth": {"kind": kind, "params": params},
                                      "jobs": args.jobs})
    _print_aggregates(manifest)


def _diag_inputs(args):
    _, split = _load_data_split(args)
    real = split.scaler.apply(dataio.values_matrix(split.train))
    tags = ["real"] * real.shape[0]
    if args.synth is not None:
        synth = load_synth(args.synth)
        fake = synth.sample(args.n, None, seed=args.seed)
        real = np.vstack([real, fake])
        tags += ["synthetic"] * fake.shape[0]
    elif args.samples is not None:
        fake = _read_matrix(args.samples)
        real = np.vstack([real, fake])
        tags += ["synthetic"] * fake.shape[0]
    return real, tags


def cmd_diag_pca(args) -> None:
    out = _claim(args, args.out)
    x, tags = _diag_inputs(args)
    res = diagnostics.pca_project(x, args.k)
    diagnostics.write_coordinates(out, res.projections, tags)
    _echo(args, _run_json_for(out), {"k": args.k, "n_points": len(tags), "eigenvalues": res.eigenvalues.tolist()})
    print("eigenvalues " + " ".join(f"{v:.6g}" for v in res.eigenvalues))


def cmd_diag_tsne(args) -> None:
    sec = _section(args, "tsne")
    perplexity = _pick(args, "perplexity", sec, "perplexity", 30.0)
    iters = _pick(args, "iters", sec, "iters", 1000)
    out = _claim(args, args.out)
    x, tags = _diag_inputs(args)
    y = diagnostics.tsne_embed(x, perplexity=perplexity, iters=iters, seed=args.seed)
    diagnostics.write_coordinates(out, y, tags)
    kl = diagnostics.kl_divergence(x, y, perplexity)
    _echo(args, _run_json_for(out), {"perplexity": perplexity, "iters": iters, "n_points": len(tags), "kl": kl})
    print(f"t-SNE KL divergence {kl:.6g}")


def cmd_report(args) -> None:
    manifest = harness.load_manifest(Path(args.exp) / "manifest.json")
    _print_aggregates(manifest)
    if args.out is not None:
        out = _claim(args, args.out)
        harness.write_aggregates(manifest, out)


def _print_aggregates(manifest) -> None:
    agg = harness.aggregate(manifest)
    width = max(len(a) for a in agg)
    print(f"{manifest.experiment}: seed {manifest.seed}, {manifest.runs} runs per arm")
    print(f"{'arm':<{width}}  " + "  ".join(f"{m + ' mean':>12} {m + ' std':>12}" for m in METRIC_NAMES) + "   n fail")
    for arm, e in agg.items():
        cells = "  ".join(f"{e[m + '_mean']:12.6g} {e[m + '_std']:12.6g}" for m in METRIC_NAMES)
        print(f"{arm:<{width}}  {cells}  {e['n']:3d} {e['failed']:4d}")


# ----------------------------------------------------------------------- parser


def _add_data_split(p) -> None:
    p.add_argument("--data", required=True, help="series CSV")
    p.add_argument("--split", required=True, help="split manifest written by `split`")


def _add_train(p) -> None:
    g = p.add_argument_group("forecaster training")
    g.add_argument("--train-epochs", type=int, dest="train_epochs")
    g.add_argument("--train-hidden", type=int, dest="train_hidden")
    g.add_argument("--train-lr", type=float, dest="train_lr")
    g.add_argument("--train-batch-size", type=int, dest="train_batch_size")
    g.add_argument("--train-patience", type=int, dest="train_patience")
    g.add_argument("--train-input-len", type=int, dest="train_input_len", help="subsampled input points per window")
    g.add_argument("--train-window-step", type=int, dest="train_window_step", help="slide windows by this many points")


def _add_synth(p) -> None:
    g = p.add_argument_group("synthesizer")
    g.add_argument("--kind", choices=KINDS)
    g.add_argument("--vq-epochs", type=int, dest="vq_epochs")
    g.add_argument("--prior-epochs", type=int, dest="prior_epochs")


def _add_diag(p) -> None:
    _add_data_split(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--synth", help="synthesizer checkpoint to sample from")
    src.add_argument("--samples", help="sample CSV written by `sample`")
    p.add_argument("--n", type=int, default=256, help="samples drawn when --synth is given")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"base seed (default ${SEED_ENV} or 0)")
    common.add_argument("--config", help="JSON or YAML settings file")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for exp1/exp2")

    parser = argparse.ArgumentParser(prog="thermaug", description="Thermal series augmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", parents=[common], help="generate a simulated test-cell dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--noise-std", type=float, dest="noise_std")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("label", parents=[common], help="attach trend classes")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="labeled copy (default: add the label column to --data in place)")
    p.add_argument("--eps-slope", type=float, dest="eps_slope")
    p.add_argument("--eps-net", type=float, dest="eps_net")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("split", parents=[common], help="per-phase train/test split")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fraction", type=float)
    p.add_argument("--rounding", choices=("round", "ceil"))
    p.add_argument("--chronological", action="store_true", help="hold out the last steps of each phase")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train-synth", parents=[common], help="fit a synthesizer on the train split")
    _add_data_split(p)
    p.add_argument("--out", required=True)
    _add_synth(p)
    p.set_defaults(func=cmd_train_synth)

    p = sub.add_parser("sample", parents=[common], help="draw series from a synthesizer")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--class", type=int, dest="cls", choices=(0, 1, 2))
    p.add_argument("--split", help="split manifest; when given, samples are written in degC")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train-forecaster", parents=[common], help="train and score one forecaster")
    _add_data_split(p)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="per-epoch loss CSV")
    _add_train(p)
    p.set_defaults(func=cmd_train_forecaster)

    p = sub.add_parser("exp1", parents=[common], help="TRTR / TSTR / TRSTR comparison")
    _add_data_split(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--synth", help="pre-fitted synthesizer checkpoint (else one is fitted)")
    p.add_argument("--runs", type=int)
    p.add_argument("--synth-n", type=int, dest="synth_n")
    p.add_argument("--train-limit", type=int, dest="train_limit")
    _add_synth(p)
    _add_train(p)
    p.set_defaults(func=cmd_exp1)

    p = sub.add_parser("exp2", parents=[common], help="class ablation and re-augmentation")
    _add_data_split(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--runs", type=int)
    p.add_argument("--ratios", type=float, nargs="+")
    p.add_argument("--train-limit", type=int, dest="train_limit")
    _add_synth(p)
    _add_train(p)
    p.set_defaults(func=cmd_exp2)

    p = sub.add_parser("diag-pca", parents=[common], help="PCA coordinates of real (and synthetic) series")
    _add_diag(p)
    p.add_argument("--k", type=int, default=2)
    p.set_defaults(func=cmd_diag_pca)

    p = sub.add_parser("diag-tsne", parents=[common], help="exact t-SNE coordinates")
    _add_diag(p)
    p.add_argument("--perplexity", type=float)
    p.add_argument("--iters", type=int)
    p.set_defaults(func=cmd_diag_tsne)

    p = sub.add_parser("report", parents=[common], help="print the aggregates of an experiment directory")
    p.add_argument("--exp", required=True)
    p.add_argument("--out", help="also write aggregates CSV here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.seed is None:
        args.seed = _default_seed()
        if args.seed is None:
            print(f"{parser.prog}: error: {SEED_ENV} must be an integer", file=sys.stderr)
            return 2
    if args.jobs < 1:
        print(f"{parser.prog}: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        args.config_data = _load_config(args.config)
        args.func(args)
    except (ThermaugError, ValueError, OSError, KeyError, yaml.YAMLError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

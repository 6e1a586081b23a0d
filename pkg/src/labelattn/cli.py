"""Command-line interface.

Commands: stats, train, eval, sweep, synth, export-attention.
Global flags: --seed, --config, --out, --date-format.  Every failure exits
nonzero after printing a single `error: <Type>: <reason>` line to stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint
from .dataio import dataset_stats, group_events, make_windows, parse_csv, split_chronological, write_csv
from .embed import encode_samples
from .errors import ConfigError, DataError, LabelAttnError
from .metrics import evaluate, fit_thresholds
from .model import ModelConfig, export_attention, predict_scores
from .synth import PlantedGraph, generate
from .train import AGGREGATE_METRICS, TrainConfig, run_multiseed

_MODEL_KEYS = {f.name for f in fields(ModelConfig)}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}
_META_KEYS = {"data", "name", "date_format"}


def _read_config(path) -> dict:
    if path is None:
        raise ConfigError("this command needs --config pointing to a JSON file")
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    unknown = sorted(set(raw) - _MODEL_KEYS - _TRAIN_KEYS - _META_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {unknown}")
    return raw


def _split_config(raw: dict, args) -> tuple[ModelConfig, TrainConfig, str, str, str]:
    model_cfg = ModelConfig.from_dict({k: v for k, v in raw.items() if k in _MODEL_KEYS})
    train_cfg = TrainConfig.from_dict({k: v for k, v in raw.items() if k in _TRAIN_KEYS})
    if args.seed is not None:
        train_cfg.seeds = (args.seed,)
    if "data" not in raw:
        raise ConfigError("config is missing the required 'data' key")
    date_format = args.date_format or raw.get("date_format", "iso")
    return model_cfg, train_cfg, raw["data"], raw.get("name", "run"), date_format


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def cmd_stats(args) -> int:
    events = parse_csv(args.data, date_format=args.date_format or "iso")
    stats = dataset_stats(events)
    for key, value in stats.items():
        print(f"{key}: {value}")
    if args.out:
        Path(args.out).write_text(json.dumps(stats, sort_keys=True, indent=1))
    return 0


def cmd_train(args) -> int:
    raw = _read_config(args.config)
    model_cfg, train_cfg, data_path, name, date_format = _split_config(raw, args)
    events = parse_csv(data_path, date_format=date_format)
    dataset = split_chronological(make_windows(group_events(events), model_cfg.tau))

    run_dir = Path(args.out) if args.out else Path("runs") / name
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool_version": __version__,
        "name": name,
        "data": str(data_path),
        "data_sha256": _sha256(data_path),
        "date_format": date_format,
        "model": model_cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "seeds": list(train_cfg.seeds),
        "artifacts": {
            "metrics": "metrics.csv",
            "aggregate": "aggregate.json",
            "seed_dirs": [f"seed{s}" for s in train_cfg.seeds],
        },
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))

    result = run_multiseed(dataset, model_cfg, train_cfg, run_dir=run_dir, dataset_name=name)
    print(f"run directory: {run_dir}")
    for metric, agg in result.aggregate.items():
        print(f"{metric}: mean {agg['mean']:.4f} std {agg['std']:.4f}")
    return 0


def cmd_eval(args) -> int:
    loaded = load_checkpoint(args.checkpoint)
    events = parse_csv(args.data, date_format=args.date_format or "iso")
    dataset = split_chronological(make_windows(group_events(events), loaded.config.tau))
    if not dataset.valid or not dataset.test:
        raise DataError("evaluation needs nonempty valid and test splits")

    def scores_targets(samples):
        enc = encode_samples(samples, loaded.vocab, loaded.config.tau)
        return predict_scores(loaded.model, enc), np.stack([s.target for s in enc])

    thresholds = fit_thresholds(*scores_targets(dataset.valid))
    report = evaluate(*scores_targets(dataset.test), thresholds=thresholds)
    for metric in AGGREGATE_METRICS:
        print(f"{metric}: {getattr(report, metric):.6f}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "metrics.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "model", "seed", "metric", "value"])
            for metric in AGGREGATE_METRICS:
                writer.writerow(
                    [Path(args.data).stem, loaded.config.variant, args.seed if args.seed is not None else 0,
                     metric, repr(getattr(report, metric))]
                )
        with open(out / "thresholds.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "threshold"])
            for label, beta in zip(loaded.vocab.labels, thresholds):
                writer.writerow([label, repr(float(beta))])
    return 0


def cmd_sweep(args) -> int:
    raw = _read_config(args.config)
    model_cfg, train_cfg, data_path, name, date_format = _split_config(raw, args)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values must be comma-separated integers: {exc}") from exc
    if not values:
        raise ConfigError("--values is empty")
    field_name = {"tau": "tau", "dim": "embed_dim"}[args.axis]

    events = parse_csv(data_path, date_format=date_format)
    out_dir = Path(args.out) if args.out else Path("runs") / f"{name}-sweep-{args.axis}"
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        cfg = ModelConfig.from_dict({**model_cfg.to_dict(), field_name: value})
        dataset = split_chronological(make_windows(group_events(events), cfg.tau))
        result = run_multiseed(dataset, cfg, train_cfg)
        for rec in result.records:
            if rec.test_metrics is None:
                continue
            rows.append([args.axis, value, rec.seed, repr(rec.test_metrics.micro_auc)])
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "seed", "micro_auc"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} sweep rows to {out_dir / 'sweep.csv'}")
    return 0


def cmd_synth(args) -> int:
    try:
        graph = PlantedGraph.from_json(Path(args.graph).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read graph spec {args.graph}: {exc}") from exc
    seed = args.seed if args.seed is not None else 0
    records = generate(graph, n_ids=args.ids, events_per_id=args.events, seed=seed)
    out = args.out or "synthetic.csv"
    write_csv(records, out)
    print(f"wrote {len(records)} events for {args.ids} sequences to {out}")
    return 0


def cmd_export_attention(args) -> int:
    loaded = load_checkpoint(args.checkpoint)
    events = parse_csv(args.data, date_format=args.date_format or "iso")
    windows = make_windows(group_events(events), loaded.config.tau)
    if not windows:
        raise DataError("no complete windows in the given events")
    encoded = encode_samples(windows, loaded.vocab, loaded.config.tau)
    avg = export_attention(loaded.model, encoded)

    tokens = ["ID", *loaded.vocab.labels]
    if "id" in loaded.config.drop:
        tokens = list(loaded.vocab.labels)
    out = args.out or "attention.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token", *tokens])
        for name, row in zip(tokens, avg):
            writer.writerow([name, *(repr(float(v)) for v in row)])
    print(f"wrote {len(tokens)}x{len(tokens)} attention map to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelattn",
        description="Label-attention models for next-event label-set prediction.",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the seed list")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--out", default=None, help="output directory or file")
    parser.add_argument(
        "--date-format",
        choices=("iso", "dd-mm-yyyy"),
        default=None,
        help="date format of input CSVs (default iso, unless the config says otherwise)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset summary statistics")
    p.add_argument("data", help="canonical CSV file")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="multi-seed training run from a config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("data", help="canonical CSV file")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="micro-AUC versus tau or embedding dimension")
    p.add_argument("--axis", choices=("tau", "dim"), required=True)
    p.add_argument("--values", required=True, help="comma-separated integers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate events from a planted graph")
    p.add_argument("--graph", required=True, help="graph spec JSON")
    p.add_argument("--ids", type=int, default=100)
    p.add_argument("--events", type=int, default=50)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("export-attention", help="averaged label-attention map as CSV")
    p.add_argument("data", help="canonical CSV file")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_export_attention)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LabelAttnError, OSError) as exc:
        reason = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {reason}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

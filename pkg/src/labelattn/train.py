"""Training loop: seeded batching, Adam with plateau schedule, early stopping,
best-checkpoint retention and multi-seed aggregation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .checkpoint import save_checkpoint
from .dataio import SplitDataset, Vocabularies, events_in_samples, fit_vocabularies
from .embed import EncodedSample, encode_samples
from .errors import ConfigError, DataError, TrainingDivergedError
from .metrics import MetricsReport, evaluate, fit_thresholds, micro_macro_auc
from .model import Model, ModelConfig, build_model, fit_amount_stats, predict_scores
from .optim import Adam, PlateauScheduler
from .tensor import bce_with_logits

AGGREGATE_METRICS = ("micro_auc", "macro_auc", "micro_f1", "macro_f1")


@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 0.001
    factor: float = 0.5
    patience: int = 3
    min_lr: float = 1e-5
    max_epochs: int = 100
    early_stop_patience: int = 10
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        self.seeds = tuple(self.seeds)

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.factor < 1.0:
            raise ConfigError(f"plateau factor must be in (0, 1), got {self.factor}")
        if self.lr <= 0 or self.min_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.patience < 1 or self.early_stop_patience < 1 or self.max_epochs < 1:
            raise ConfigError("patience values and max_epochs must be >= 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "lr": self.lr,
            "factor": self.factor,
            "patience": self.patience,
            "min_lr": self.min_lr,
            "max_epochs": self.max_epochs,
            "early_stop_patience": self.early_stop_patience,
            "seeds": list(self.seeds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown train config key(s): {unknown}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class EncodedSplit:
    """Samples of one split with a provenance tag checked at every use site."""

    name: str
    samples: list[EncodedSample]
    targets: np.ndarray  # (n, K)


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    valid_micro_auc: float
    lr: float


@dataclass
class RunRecord:
    seed: int
    epochs: list[EpochRow]
    best_epoch: int
    best_valid_micro_auc: float
    thresholds: np.ndarray
    test_metrics: MetricsReport | None
    checkpoint_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "best_valid_micro_auc": self.best_valid_micro_auc,
            "thresholds": [float(b) for b in self.thresholds],
            "test_metrics": None if self.test_metrics is None else self.test_metrics.to_dict(),
            "checkpoint_path": self.checkpoint_path,
            "epochs": [
                {
                    "epoch": r.epoch,
                    "train_loss": r.train_loss,
                    "valid_micro_auc": r.valid_micro_auc,
                    "lr": r.lr,
                }
                for r in self.epochs
            ],
        }


def _encode_split(name: str, samples, vocab, tau: int) -> EncodedSplit:
    enc = encode_samples(samples, vocab, tau)
    targets = np.stack([s.target for s in enc]) if enc else np.zeros((0, vocab.n_labels))
    return EncodedSplit(name, enc, targets)


def _split_scores(model: Model, split: EncodedSplit, expected: str) -> np.ndarray:
    assert split.name == expected, f"metrics for {expected!r} computed on {split.name!r} data"
    return predict_scores(model, split.samples)


def _write_metrics_csv(path: Path, rows: list[EpochRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "valid_micro_auc", "lr"])
        for r in rows:
            writer.writerow([r.epoch, repr(r.train_loss), repr(r.valid_micro_auc), repr(r.lr)])


def fit_predictor(
    dataset: SplitDataset,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    seed: int,
) -> tuple[Model, Vocabularies, RunRecord]:
    """Full training run; returns the best-epoch model alongside its record."""
    model_cfg.validate()
    train_cfg.validate()
    if not dataset.train or not dataset.valid:
        raise DataError("training requires nonempty train and valid splits")

    vocab = fit_vocabularies(events_in_samples(dataset.train), model_cfg.n_amount_bins)
    train = _encode_split("train", dataset.train, vocab, model_cfg.tau)
    valid = _encode_split("valid", dataset.valid, vocab, model_cfg.tau)
    test = _encode_split("test", dataset.test, vocab, model_cfg.tau)

    rng = np.random.default_rng(seed)
    model = build_model(model_cfg, vocab, rng, amount_stats=fit_amount_stats(train.samples))
    opt = Adam(model.params(), lr=train_cfg.lr)
    sched = PlateauScheduler(
        opt, factor=train_cfg.factor, patience=train_cfg.patience, min_lr=train_cfg.min_lr
    )

    n = len(train.samples)
    best_auc, best_epoch, since_best = -math.inf, 0, 0
    best_state: dict[str, np.ndarray] = {}
    rows: list[EpochRow] = []

    for epoch in range(1, train_cfg.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            assert train.name == "train"
            batch = [train.samples[i] for i in idx]
            logits = model.forward(batch, train=True, rng=rng).logits
            loss = bce_with_logits(logits, train.targets[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}, batch {start // train_cfg.batch_size}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            loss_sum += value * len(idx)

        valid_auc = micro_macro_auc(_split_scores(model, valid, "valid"), valid.targets).micro
        sched.step(valid_auc)
        rows.append(EpochRow(epoch, loss_sum / n, valid_auc, opt.lr))

        if valid_auc > best_auc:
            best_auc, best_epoch, since_best = valid_auc, epoch, 0
            best_state = {k: t.data.copy() for k, t in model.params().items()}
        else:
            since_best += 1
            if since_best >= train_cfg.early_stop_patience:
                break

    for k, t in model.params().items():
        t.data[...] = best_state[k]
    valid_scores = _split_scores(model, valid, "valid")
    thresholds = fit_thresholds(valid_scores, valid.targets)
    test_metrics = (
        evaluate(_split_scores(model, test, "test"), test.targets, thresholds)
        if test.samples
        else None
    )

    record = RunRecord(
        seed=seed,
        epochs=rows,
        best_epoch=best_epoch,
        best_valid_micro_auc=best_auc,
        thresholds=thresholds,
        test_metrics=test_metrics,
    )
    return model, vocab, record


def train_model(
    dataset: SplitDataset,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    seed: int,
    run_dir: str | Path | None = None,
) -> RunRecord:
    model, vocab, record = fit_predictor(dataset, model_cfg, train_cfg, seed)
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        record.checkpoint_path = str(run_dir / "checkpoint")
        save_checkpoint(record.checkpoint_path, model, vocab)
        _write_metrics_csv(run_dir / "metrics.csv", record.epochs)
        (run_dir / "config.json").write_text(
            json.dumps(
                {"model": model_cfg.to_dict(), "train": train_cfg.to_dict(), "seed": seed},
                sort_keys=True,
                indent=1,
            )
        )
    return record


@dataclass
class MultiSeedResult:
    records: list[RunRecord]
    aggregate: dict[str, dict[str, float]]  # metric -> {"mean", "std"}


def aggregate_records(records: Sequence[RunRecord]) -> dict[str, dict[str, float]]:
    """Mean and population std of each test metric across seeds."""
    reports = [r.test_metrics for r in records if r.test_metrics is not None]
    out = {}
    for metric in AGGREGATE_METRICS:
        vals = np.array([getattr(rep, metric) for rep in reports])
        if vals.size:
            out[metric] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def run_multiseed(
    dataset: SplitDataset,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    run_dir: str | Path | None = None,
    dataset_name: str = "dataset",
) -> MultiSeedResult:
    train_cfg.validate()
    records = []
    for seed in train_cfg.seeds:
        seed_dir = None if run_dir is None else Path(run_dir) / f"seed{seed}"
        records.append(train_model(dataset, model_cfg, train_cfg, seed, run_dir=seed_dir))
    aggregate = aggregate_records(records)

    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        with open(run_dir / "metrics.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "model", "seed", "metric", "value"])
            for rec in records:
                if rec.test_metrics is None:
                    continue
                for metric in AGGREGATE_METRICS:
                    writer.writerow(
                        [
                            dataset_name,
                            model_cfg.variant,
                            rec.seed,
                            metric,
                            repr(getattr(rec.test_metrics, metric)),
                        ]
                    )
        (run_dir / "aggregate.json").write_text(json.dumps(aggregate, sort_keys=True, indent=1))
    return MultiSeedResult(records=records, aggregate=aggregate)

"""Multi-label metrics: ranking AUC, per-label thresholds, F1, and model rank tables."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, DegenerateLabelError, ShapeError


def auc(scores, targets) -> float:
    """Probability a random positive outranks a random negative; ties count 1/2.

    Raises DegenerateLabelError when targets are all-positive or all-negative.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"scores {s.shape} vs targets {y.shape}")
    pos = y > 0.5
    n_pos = int(pos.sum())
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelError(
            f"AUC undefined: {n_pos} positives, {n_neg} negatives"
        )
    ranks = rankdata(s)  # average ranks realize the tie = 1/2 convention
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class AucSummary:
    micro: float
    macro: float
    per_label: tuple[float | None, ...]  # None marks a degenerate (skipped) label
    n_skipped: int


def micro_macro_auc(scores: np.ndarray, targets: np.ndarray) -> AucSummary:
    """Micro: one AUC over all (sample, label) cells. Macro: mean of per-label AUCs.

    Labels without both classes are skipped from the macro mean and counted.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if s.ndim != 2 or s.shape != y.shape:
        raise ShapeError(f"expected matching (n, k) matrices, got {s.shape} and {y.shape}")
    per_label: list[float | None] = []
    for k in range(s.shape[1]):
        try:
            per_label.append(auc(s[:, k], y[:, k]))
        except DegenerateLabelError:
            per_label.append(None)
    defined = [v for v in per_label if v is not None]
    if not defined:
        raise DegenerateLabelError("every label is degenerate; macro-AUC undefined")
    return AucSummary(
        micro=auc(s.ravel(), y.ravel()),
        macro=float(np.mean(defined)),
        per_label=tuple(per_label),
        n_skipped=len(per_label) - len(defined),
    )


def _f1_from_counts(tp: float, fp: float, fn: float) -> float:
    denom = 2.0 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


def _fit_one_threshold(s: np.ndarray, y: np.ndarray) -> float:
    if y.sum() == 0:
        return 0.5  # no positives to fit against
    distinct = np.unique(s)
    candidates = np.concatenate(([0.0], (distinct[:-1] + distinct[1:]) / 2.0, [1.0]))
    order = np.argsort(s, kind="stable")
    ss = s[order]
    yy = y[order]
    pos_at_or_above = np.concatenate((np.cumsum(yy[::-1])[::-1], [0.0]))
    cut = np.searchsorted(ss, candidates, side="right")  # predictions are score > beta
    tp = pos_at_or_above[cut]
    predicted = len(ss) - cut
    fp = predicted - tp
    fn = yy.sum() - tp
    denom = 2.0 * tp + fp + fn
    f1 = np.divide(2.0 * tp, denom, out=np.zeros_like(tp, dtype=np.float64), where=denom > 0)
    return float(candidates[int(np.argmax(f1))])  # first max = smallest beta on ties


def fit_thresholds(scores: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-label decision thresholds maximizing F1 on the given (validation) data.

    Candidates are midpoints of consecutive distinct scores plus {0, 1}; ties
    resolve to the smallest threshold; labels with no positives get 0.5.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if s.ndim != 2 or s.shape != y.shape:
        raise ShapeError(f"expected matching (n, k) matrices, got {s.shape} and {y.shape}")
    return np.array([_fit_one_threshold(s[:, k], y[:, k]) for k in range(s.shape[1])])


@dataclass
class F1Summary:
    micro: float
    macro: float
    per_label: tuple[float, ...]


def micro_macro_f1(scores: np.ndarray, targets: np.ndarray, thresholds: np.ndarray) -> F1Summary:
    """Thresholded F1: predictions are strict `score > threshold`; 0/0 counts as 0."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    beta = np.asarray(thresholds, dtype=np.float64)
    if s.shape != y.shape or beta.shape != (s.shape[1],):
        raise ShapeError("scores/targets must be (n, k) and thresholds (k,)")
    pred = s > beta
    pos = y > 0.5
    tp = (pred & pos).sum(axis=0).astype(float)
    fp = (pred & ~pos).sum(axis=0).astype(float)
    fn = (~pred & pos).sum(axis=0).astype(float)
    per_label = tuple(_f1_from_counts(*c) for c in zip(tp, fp, fn))
    return F1Summary(
        micro=_f1_from_counts(tp.sum(), fp.sum(), fn.sum()),
        macro=float(np.mean(per_label)),
        per_label=per_label,
    )


@dataclass
class MetricsReport:
    micro_auc: float
    macro_auc: float
    micro_f1: float
    macro_f1: float
    n_auc_skipped: int
    per_label_auc: tuple[float | None, ...]
    per_label_f1: tuple[float, ...]

    def to_dict(self) -> dict[str, float]:
        return {
            "micro_auc": self.micro_auc,
            "macro_auc": self.macro_auc,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "n_auc_skipped": self.n_auc_skipped,
        }


def evaluate(scores: np.ndarray, targets: np.ndarray, thresholds: np.ndarray) -> MetricsReport:
    aucs = micro_macro_auc(scores, targets)
    f1s = micro_macro_f1(scores, targets, thresholds)
    return MetricsReport(
        micro_auc=aucs.micro,
        macro_auc=aucs.macro,
        micro_f1=f1s.micro,
        macro_f1=f1s.macro,
        n_auc_skipped=aucs.n_skipped,
        per_label_auc=aucs.per_label,
        per_label_f1=f1s.per_label,
    )


@dataclass
class RankTable:
    """Per-dataset model ranks (1 = best, ties share the average rank)."""

    datasets: tuple[str, ...]
    models: tuple[str, ...]
    metrics: tuple[str, ...]
    ranks: dict[str, dict[str, dict[str, float]]]  # dataset -> model -> metric -> rank
    mean_rank: dict[str, dict[str, float]]  # model -> metric -> mean over datasets


def rank_table(values: Mapping[str, Mapping[str, Mapping[str, float]]]) -> RankTable:
    """Rank models within each dataset and metric (higher value = better)."""
    if not values:
        raise ConfigError("rank_table needs at least one dataset")
    datasets = tuple(sorted(values))
    models = tuple(sorted(values[datasets[0]]))
    metrics = tuple(sorted(values[datasets[0]][models[0]]))
    for d in datasets:
        if tuple(sorted(values[d])) != models:
            raise ConfigError(f"dataset {d}: model set differs")
        for m in models:
            if tuple(sorted(values[d][m])) != metrics:
                raise ConfigError(f"dataset {d}, model {m}: metric set differs")
    ranks: dict[str, dict[str, dict[str, float]]] = {d: {m: {} for m in models} for d in datasets}
    for d in datasets:
        for metric in metrics:
            vals = np.array([values[d][m][metric] for m in models], dtype=np.float64)
            r = rankdata(-vals)  # descending: best value gets rank 1
            for m, rank in zip(models, r):
                ranks[d][m][metric] = float(rank)
    mean_rank = {
        m: {metric: float(np.mean([ranks[d][m][metric] for d in datasets])) for metric in metrics}
        for m in models
    }
    return RankTable(datasets, models, metrics, ranks, mean_rank)

"""Scikit-learn style facade over the full next-event pipeline.

`fit` takes a flat list of EventRecord (any number of sequences), builds
sliding windows, splits them chronologically per sequence, trains one model
and fits per-label thresholds on the validation split.  `predict_proba`
scores the event following each sequence's full history.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .dataio import WindowSample, group_events, make_windows, split_chronological, validate_events
from .embed import encode_samples
from .errors import DataError
from .metrics import micro_macro_auc
from .model import ModelConfig, predict_scores
from .train import TrainConfig, fit_predictor


class LabelSetPredictor(BaseEstimator):
    """Predicts the label set of each sequence's next event.

    Parameters mirror ModelConfig / TrainConfig; see those for semantics.
    """

    def __init__(
        self,
        variant: str = "lanet",
        tau: int = 3,
        embed_dim: int = 32,
        layers: int = 2,
        heads: int = 4,
        dropout: float = 0.3,
        absence_indication: bool = False,
        drop: tuple = (),
        n_amount_bins: int = 100,
        batch_size: int = 32,
        lr: float = 0.001,
        max_epochs: int = 100,
        early_stop_patience: int = 10,
        seed: int = 0,
    ):
        self.variant = variant
        self.tau = tau
        self.embed_dim = embed_dim
        self.layers = layers
        self.heads = heads
        self.dropout = dropout
        self.absence_indication = absence_indication
        self.drop = drop
        self.n_amount_bins = n_amount_bins
        self.batch_size = batch_size
        self.lr = lr
        self.max_epochs = max_epochs
        self.early_stop_patience = early_stop_patience
        self.seed = seed

    def _configs(self) -> tuple[ModelConfig, TrainConfig]:
        model_cfg = ModelConfig(
            variant=self.variant,
            tau=self.tau,
            embed_dim=self.embed_dim,
            layers=self.layers,
            heads=self.heads,
            dropout=self.dropout,
            absence_indication=self.absence_indication,
            drop=tuple(self.drop),
            n_amount_bins=self.n_amount_bins,
        )
        train_cfg = TrainConfig(
            batch_size=self.batch_size,
            lr=self.lr,
            max_epochs=self.max_epochs,
            early_stop_patience=self.early_stop_patience,
            seeds=(self.seed,),
        )
        return model_cfg, train_cfg

    def fit(self, X, y=None):
        """X: list of EventRecord covering one or more sequences. y is unused
        (targets are the sequences' own next events)."""
        validate_events(X)
        model_cfg, train_cfg = self._configs()
        dataset = split_chronological(make_windows(group_events(X), self.tau))
        self.model_, self.vocab_, self.record_ = fit_predictor(
            dataset, model_cfg, train_cfg, self.seed
        )
        self.thresholds_ = self.record_.thresholds
        self.classes_ = self.vocab_.labels
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "this LabelSetPredictor is not fitted yet; call fit before predicting"
            )

    def _tail_windows(self, X) -> tuple[list[str], list[WindowSample]]:
        validate_events(X)
        windows = []
        by_id = group_events(X)
        ids = sorted(by_id)
        for sid in ids:
            seq = by_id[sid]
            if len(seq) < self.tau:
                raise DataError(
                    f"sequence {sid!r} has {len(seq)} events; need at least tau={self.tau}"
                )
            tail = seq[-self.tau :]
            dts = [None] + [(b.date - a.date).days for a, b in zip(tail, tail[1:])]
            if len(seq) > self.tau:
                dts[0] = (tail[0].date - seq[-self.tau - 1].date).days
            windows.append(
                WindowSample(
                    sequence_id=sid,
                    window=tuple(tail),
                    dts=tuple(dts),
                    target_labels=(),
                    target_amounts=(),
                    target_date=None,
                )
            )
        return ids, windows

    def predict_proba(self, X) -> np.ndarray:
        """One row per sequence ID (sorted): scores for the next event's labels."""
        self._check_fitted()
        _, windows = self._tail_windows(X)
        encoded = encode_samples(windows, self.vocab_, self.tau)
        return predict_scores(self.model_, encoded)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) > self.thresholds_).astype(float)

    def score(self, X, y=None) -> float:
        """Micro-AUC over all sliding windows of X (targets come from X itself)."""
        self._check_fitted()
        validate_events(X)
        windows = make_windows(group_events(X), self.tau)
        if not windows:
            raise DataError("no complete windows in the given events")
        encoded = encode_samples(windows, self.vocab_, self.tau)
        targets = np.stack([s.target for s in encoded])
        return micro_macro_auc(predict_scores(self.model_, encoded), targets).micro

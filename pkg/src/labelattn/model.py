"""Model architectures over assembled tokens: label attention, its variants, and baselines.

All variants share one contract: ``forward(batch, train, rng)`` returns raw
per-label logits ``(B, K)`` plus whatever attention maps the variant produces;
``predict_scores`` turns logits into sigmoid scores.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np
from scipy.special import expit

from .dataio import Vocabularies
from .embed import COMPONENTS, EmbeddingTables, EncodedSample, assemble_label_tokens, assemble_time_tokens, init_tables
from .errors import ConfigError, ShapeError
from .layers import EncoderLayer, Linear, LSTMCell, prefixed
from .tensor import Tensor, broadcast_to, concat, dropout, no_grad, take_rows

VARIANTS = (
    "lanet",
    "time_attention",
    "concat_attention",
    "gated_attention",
    "transformer_base",
    "lstm",
)
_LABEL_BRANCH = ("lanet", "concat_attention", "gated_attention")
_TIME_BRANCH = ("time_attention", "concat_attention", "gated_attention")


@dataclass
class ModelConfig:
    variant: str = "lanet"
    tau: int = 3
    embed_dim: int = 128  # per-component width d_c; label tokens are 3 * embed_dim wide
    layers: int = 2
    heads: int = 4
    dropout: float = 0.3
    absence_indication: bool = False
    drop: tuple[str, ...] = ()
    n_amount_bins: int = 100  # quantile bins fitted on train amounts

    def __post_init__(self):
        self.drop = tuple(self.drop)

    @property
    def dim(self) -> int:
        return 3 * self.embed_dim

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.tau < 1:
            raise ConfigError(f"tau must be >= 1, got {self.tau}")
        if self.embed_dim < 1 or self.layers < 1 or self.heads < 1:
            raise ConfigError("embed_dim, layers and heads must be positive")
        if self.dim % self.heads:
            raise ConfigError(
                f"token dim {self.dim} (= 3 * embed_dim) must be divisible by heads={self.heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        unknown = set(self.drop) - set(COMPONENTS)
        if unknown:
            raise ConfigError(f"unknown drop component(s): {sorted(unknown)}")
        if self.n_amount_bins < 1:
            raise ConfigError(f"n_amount_bins must be >= 1, got {self.n_amount_bins}")
        if self.drop and self.variant in ("transformer_base", "lstm"):
            raise ConfigError("component drops apply to label/time attention variants only")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "tau": self.tau,
            "embed_dim": self.embed_dim,
            "layers": self.layers,
            "heads": self.heads,
            "dropout": self.dropout,
            "absence_indication": self.absence_indication,
            "drop": list(self.drop),
            "n_amount_bins": self.n_amount_bins,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown model config key(s): {unknown}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class ForwardResult:
    logits: Tensor  # (B, K)
    label_attention: list[Tensor] = field(default_factory=list)  # per layer (B, H, K+1, K+1)
    time_attention: list[Tensor] = field(default_factory=list)  # per layer (B, H, tau+1, tau+1)


def fit_amount_stats(train_batch: Sequence[EncodedSample]) -> tuple[np.ndarray, np.ndarray]:
    """Per-label mean/std of the raw amount vectors, fitted on training windows."""
    flat = np.concatenate([s.raw_amounts for s in train_batch], axis=0)
    std = flat.std(axis=0)
    return flat.mean(axis=0), np.where(std > 0, std, 1.0)


class LabelAttentionNet:
    """Self-attention between per-label tokens (and, for variants, per-timestamp tokens)."""

    def __init__(self, cfg: ModelConfig, vocab: Vocabularies, rng: np.random.Generator):
        cfg.validate()
        if cfg.variant not in _LABEL_BRANCH + _TIME_BRANCH:
            raise ConfigError(f"variant {cfg.variant!r} is not an attention variant")
        self.cfg = cfg
        self.n_labels = vocab.n_labels
        self.tables = init_tables(
            vocab, cfg.tau, cfg.embed_dim, rng, absence_indication=cfg.absence_indication
        )
        dim = cfg.dim
        self.label_encoder = (
            [EncoderLayer(dim, cfg.heads, cfg.dropout, rng) for _ in range(cfg.layers)]
            if cfg.variant in _LABEL_BRANCH
            else []
        )
        self.label_head = Linear(dim, 1, rng) if cfg.variant in ("lanet", "gated_attention") else None
        self.time_encoder = (
            [EncoderLayer(dim, cfg.heads, cfg.dropout, rng) for _ in range(cfg.layers)]
            if cfg.variant in _TIME_BRANCH
            else []
        )
        self.time_head = (
            Linear(dim, vocab.n_labels, rng)
            if cfg.variant in ("time_attention", "gated_attention")
            else None
        )
        self.concat_head = (
            Linear(2 * dim, 1, rng) if cfg.variant == "concat_attention" else None
        )
        self.gate = (
            Tensor(np.zeros(1), requires_grad=True) if cfg.variant == "gated_attention" else None
        )

    def _run_label_branch(self, batch, train, rng):
        drop = frozenset(self.cfg.drop)
        x = assemble_label_tokens(batch, self.tables, drop=drop)
        maps = []
        for layer in self.label_encoder:
            x, w = layer(x, train, rng)
            maps.append(w)
        x = dropout(x, self.cfg.dropout, train, rng)
        label_tokens = x if "id" in drop else x[:, 1:, :]
        return label_tokens, maps

    def _run_time_branch(self, batch, train, rng):
        drop = frozenset(self.cfg.drop)
        x = assemble_time_tokens(batch, self.tables, drop=drop)
        maps = []
        for layer in self.time_encoder:
            x, w = layer(x, train, rng)
            maps.append(w)
        pooled = dropout(x.mean(axis=1), self.cfg.dropout, train, rng)
        return pooled, maps

    def forward(
        self,
        batch: Sequence[EncodedSample],
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> ForwardResult:
        b, k = len(batch), self.n_labels
        variant = self.cfg.variant
        label_logits = label_maps = None
        if variant in _LABEL_BRANCH:
            label_tokens, label_maps = self._run_label_branch(batch, train, rng)
            if self.label_head is not None:
                label_logits = (
                    label_tokens @ self.label_head.weight + self.label_head.bias
                ).reshape(b, k)
        if variant == "lanet":
            return ForwardResult(label_logits, label_maps)

        pooled, time_maps = self._run_time_branch(batch, train, rng)
        if variant == "time_attention":
            return ForwardResult(self.time_head(pooled), [], time_maps)
        if variant == "concat_attention":
            dim = self.cfg.dim
            wide = broadcast_to(pooled.reshape(b, 1, dim), (b, k, dim))
            joined = concat([label_tokens, wide], axis=-1)  # (B, K, 2D)
            logits = (joined @ self.concat_head.weight + self.concat_head.bias).reshape(b, k)
            return ForwardResult(logits, label_maps, time_maps)
        # gated: sigmoid(scalar) mixes the two branch logit vectors
        g = self.gate.sigmoid()
        logits = g * label_logits + (1.0 - g) * self.time_head(pooled)
        return ForwardResult(logits, label_maps, time_maps)

    def params(self) -> dict[str, Tensor]:
        out = dict(self.tables.params())
        for i, layer in enumerate(self.label_encoder):
            out.update(prefixed(f"label_encoder.{i}", layer.params()))
        if self.label_head is not None:
            out.update(prefixed("label_head", self.label_head.params()))
        for i, layer in enumerate(self.time_encoder):
            out.update(prefixed(f"time_encoder.{i}", layer.params()))
        if self.time_head is not None:
            out.update(prefixed("time_head", self.time_head.params()))
        if self.concat_head is not None:
            out.update(prefixed("concat_head", self.concat_head.params()))
        if self.gate is not None:
            out["gate"] = self.gate
        return out


class _TimestampInputs:
    """Shared per-timestamp feature pipeline of the two baselines.

    Each window position becomes amount-vector projection + dt + position
    embeddings at full width; the ID embedding is its own leading token.
    """

    def __init__(self, cfg: ModelConfig, vocab: Vocabularies, rng: np.random.Generator,
                 amount_stats: tuple[np.ndarray, np.ndarray]):
        dim = cfg.dim
        self.cfg = cfg
        mean, std = amount_stats
        if mean.shape != (vocab.n_labels,) or std.shape != (vocab.n_labels,):
            raise ShapeError("amount stats must be per-label vectors")
        self.amount_mean = mean.astype(np.float64)
        self.amount_std = std.astype(np.float64)
        self.amount_proj = Linear(vocab.n_labels, dim, rng)
        self.dt_table = Tensor(rng.standard_normal((len(vocab.dt_values) + 1, dim)), requires_grad=True)
        self.position_table = Tensor(rng.standard_normal((cfg.tau, dim)), requires_grad=True)
        self.id_table = Tensor(rng.standard_normal((len(vocab.ids) + 1, dim)), requires_grad=True)

    def step_vectors(self, batch: Sequence[EncodedSample]) -> tuple[Tensor, Tensor]:
        """Returns (steps (B, tau, D), id token (B, 1, D))."""
        b, tau, dim = len(batch), self.cfg.tau, self.cfg.dim
        raw = np.stack([s.raw_amounts for s in batch])  # (B, tau, K)
        normed = Tensor((raw - self.amount_mean) / self.amount_std)
        x = self.amount_proj(normed)
        step_dt = np.concatenate([s.step_dt for s in batch])
        time_emb = (
            take_rows(self.dt_table, step_dt)
            + take_rows(self.position_table, np.tile(np.arange(tau), b))
        ).reshape(b, tau, dim)
        ids = take_rows(self.id_table, np.array([s.id_idx for s in batch], dtype=np.intp))
        return x + time_emb, ids.reshape(b, 1, dim)

    def params(self) -> dict[str, Tensor]:
        out = prefixed("amount_proj", self.amount_proj.params())
        out.update(
            {"dt_table": self.dt_table, "position_table": self.position_table, "id_table": self.id_table}
        )
        return out


class TimestampTransformer:
    """Attention between timestamp tokens (amount vector + time embedding per event)."""

    def __init__(self, cfg: ModelConfig, vocab: Vocabularies, rng: np.random.Generator,
                 amount_stats: tuple[np.ndarray, np.ndarray]):
        cfg.validate()
        self.cfg = cfg
        self.n_labels = vocab.n_labels
        self.inputs = _TimestampInputs(cfg, vocab, rng, amount_stats)
        self.encoder = [EncoderLayer(cfg.dim, cfg.heads, cfg.dropout, rng) for _ in range(cfg.layers)]
        self.head = Linear(cfg.dim, vocab.n_labels, rng)

    def forward(self, batch, train=False, rng=None) -> ForwardResult:
        steps, ids = self.inputs.step_vectors(batch)
        x = concat([ids, steps], axis=1)  # (B, tau+1, D)
        maps = []
        for layer in self.encoder:
            x, w = layer(x, train, rng)
            maps.append(w)
        pooled = dropout(x.mean(axis=1), self.cfg.dropout, train, rng)
        return ForwardResult(self.head(pooled), [], maps)

    def params(self) -> dict[str, Tensor]:
        out = self.inputs.params()
        for i, layer in enumerate(self.encoder):
            out.update(prefixed(f"encoder.{i}", layer.params()))
        out.update(prefixed("head", self.head.params()))
        return out


class LstmBaseline:
    """The timestamp inputs consumed sequentially; final hidden state predicts."""

    def __init__(self, cfg: ModelConfig, vocab: Vocabularies, rng: np.random.Generator,
                 amount_stats: tuple[np.ndarray, np.ndarray]):
        cfg.validate()
        self.cfg = cfg
        self.n_labels = vocab.n_labels
        self.inputs = _TimestampInputs(cfg, vocab, rng, amount_stats)
        self.cell = LSTMCell(cfg.dim, cfg.dim, rng)
        self.head = Linear(cfg.dim, vocab.n_labels, rng)

    def forward(self, batch, train=False, rng=None) -> ForwardResult:
        steps, ids = self.inputs.step_vectors(batch)
        b, dim = len(batch), self.cfg.dim
        h = Tensor(np.zeros((b, dim)))
        c = Tensor(np.zeros((b, dim)))
        h, c = self.cell(ids.reshape(b, dim), h, c)  # ID enters first
        for t in range(self.cfg.tau):
            h, c = self.cell(steps[:, t, :], h, c)
        h = dropout(h, self.cfg.dropout, train, rng)
        return ForwardResult(self.head(h))

    def params(self) -> dict[str, Tensor]:
        out = self.inputs.params()
        out.update(prefixed("cell", self.cell.params()))
        out.update(prefixed("head", self.head.params()))
        return out


Model = LabelAttentionNet | TimestampTransformer | LstmBaseline


def build_model(
    cfg: ModelConfig,
    vocab: Vocabularies,
    rng: np.random.Generator,
    amount_stats: tuple[np.ndarray, np.ndarray] | None = None,
) -> Model:
    cfg.validate()
    if cfg.variant in ("transformer_base", "lstm"):
        if amount_stats is None:
            raise ConfigError(f"variant {cfg.variant!r} needs train-fitted amount stats")
        cls = TimestampTransformer if cfg.variant == "transformer_base" else LstmBaseline
        return cls(cfg, vocab, rng, amount_stats)
    return LabelAttentionNet(cfg, vocab, rng)


def predict_scores(model: Model, samples: Sequence[EncodedSample], batch_size: int = 256) -> np.ndarray:
    """Sigmoid scores (n, K) computed in eval mode (no dropout, no graph)."""
    chunks = []
    with no_grad():
        for i in range(0, len(samples), batch_size):
            chunks.append(expit(model.forward(samples[i : i + batch_size]).logits.data))
    return np.concatenate(chunks) if chunks else np.zeros((0, model.n_labels))


def frequency_scores(train_targets: np.ndarray, n_samples: int) -> np.ndarray:
    """Constant per-label scores: each label's training frequency."""
    freq = np.asarray(train_targets, dtype=np.float64).mean(axis=0)
    return np.tile(freq, (n_samples, 1))


def export_attention(
    model: Model, samples: Sequence[EncodedSample], batch_size: int = 256
) -> np.ndarray:
    """Label-attention map averaged over heads, layers and samples: (K+1, K+1).

    Row i gives token i's attention distribution (row sums are 1); token 0 is
    the sequence-ID token.  Only variants with a label branch export maps.
    """
    if not isinstance(model, LabelAttentionNet) or model.cfg.variant not in _LABEL_BRANCH:
        raise ConfigError("variant has no label-attention maps to export")
    if not samples:
        raise ConfigError("need at least one sample to export attention")
    total = None
    count = 0
    with no_grad():
        for i in range(0, len(samples), batch_size):
            res = model.forward(samples[i : i + batch_size])
            stacked = np.stack([m.data for m in res.label_attention])  # (L, B, H, T, T)
            batch_mean = stacked.mean(axis=(0, 2)).sum(axis=0)  # sum over B of layer/head means
            total = batch_mean if total is None else total + batch_mean
            count += stacked.shape[1]
    return total / count

"""Token assembly: turn window samples into per-label (and per-timestamp) embedding stacks.

Label tokens are laid out as [label | time | amount] blocks of equal width, so
the token dimension is D = 3 * d_c.  Token 0 of every stack is the sequence-ID
embedding at full width D.  Labels absent from the whole window keep exactly
zero time and amount blocks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import Vocabularies, WindowSample
from .errors import ConfigError, ShapeError
from .tensor import Tensor, concat, segment_sum, take_rows

COMPONENTS = ("amount", "time", "id")


@dataclass
class EmbeddingTables:
    """Learnable lookup tables; all rows drawn from N(0, 1) at init."""

    label: Tensor  # (K, d_c)
    dt: Tensor  # (n_dt_values + 1, d_c); row 0 = no predecessor / unseen-small gap
    position: Tensor  # (tau, d_c)
    amount: Tensor  # (n_bins, d_c)
    id: Tensor  # (n_ids + 1, D); row 0 = unknown ID
    absence: Tensor | None  # (D,) when absence indication is enabled

    @property
    def d_c(self) -> int:
        return self.label.shape[1]

    @property
    def dim(self) -> int:
        return 3 * self.d_c

    def params(self) -> dict[str, Tensor]:
        out = {
            "label_table": self.label,
            "dt_table": self.dt,
            "position_table": self.position,
            "amount_table": self.amount,
            "id_table": self.id,
        }
        if self.absence is not None:
            out["absence_vector"] = self.absence
        return out


def init_tables(
    vocab: Vocabularies,
    tau: int,
    d_c: int,
    rng: np.random.Generator,
    absence_indication: bool = False,
) -> EmbeddingTables:
    if d_c < 1:
        raise ConfigError(f"embedding dim must be positive, got {d_c}")
    dim = 3 * d_c
    norm = lambda *shape: Tensor(rng.standard_normal(shape), requires_grad=True)
    return EmbeddingTables(
        label=norm(vocab.n_labels, d_c),
        dt=norm(len(vocab.dt_values) + 1, d_c),
        position=norm(tau, d_c),
        amount=norm(vocab.n_amount_bins, d_c),
        id=norm(len(vocab.ids) + 1, dim),
        absence=norm(dim) if absence_indication else None,
    )


@dataclass
class EncodedSample:
    """Integer views of one window sample, precomputed once per dataset."""

    id_idx: int
    occ_label: np.ndarray  # label index of each (position, label) occurrence
    occ_dt: np.ndarray  # dt-table row for the occurrence's position
    occ_pos: np.ndarray  # window position of the occurrence
    occ_bin: np.ndarray  # amount bin of the occurrence
    step_dt: np.ndarray  # (tau,) dt-table row per window position
    absent: np.ndarray  # (K,) 1.0 where the label never occurs in the window
    target: np.ndarray  # (K,) binary next-event labels
    raw_amounts: np.ndarray  # (tau, K) raw amounts at label slots, 0 where absent


def encode_samples(
    samples: Sequence[WindowSample], vocab: Vocabularies, tau: int
) -> list[EncodedSample]:
    out = []
    k = vocab.n_labels
    for s in samples:
        if len(s.window) != tau:
            raise ShapeError(f"expected windows of length {tau}, got {len(s.window)}")
        occ_label, occ_dt, occ_pos, occ_bin = [], [], [], []
        step_dt = np.array([vocab.dt_index(g) for g in s.dts], dtype=np.intp)
        absent = np.ones(k)
        raw = np.zeros((tau, k))
        for pos, event in enumerate(s.window):
            for lab, amount in zip(event.labels, event.amounts):
                idx = vocab.label_index(lab)
                if idx is None:
                    continue  # label outside the training universe
                occ_label.append(idx)
                occ_dt.append(step_dt[pos])
                occ_pos.append(pos)
                occ_bin.append(vocab.amount_bin(amount))
                absent[idx] = 0.0
                raw[pos, idx] = amount
        target = np.zeros(k)
        for lab in s.target_labels:
            idx = vocab.label_index(lab)
            if idx is not None:
                target[idx] = 1.0
        out.append(
            EncodedSample(
                id_idx=vocab.id_index(s.sequence_id),
                occ_label=np.asarray(occ_label, dtype=np.intp),
                occ_dt=np.asarray(occ_dt, dtype=np.intp),
                occ_pos=np.asarray(occ_pos, dtype=np.intp),
                occ_bin=np.asarray(occ_bin, dtype=np.intp),
                step_dt=step_dt,
                absent=absent,
                target=target,
                raw_amounts=raw,
            )
        )
    return out


def _gather_occurrences(batch: Sequence[EncodedSample]):
    occ_label = np.concatenate([s.occ_label for s in batch])
    occ_dt = np.concatenate([s.occ_dt for s in batch])
    occ_pos = np.concatenate([s.occ_pos for s in batch])
    occ_bin = np.concatenate([s.occ_bin for s in batch])
    sample_of_occ = np.concatenate(
        [np.full(len(s.occ_label), i, dtype=np.intp) for i, s in enumerate(batch)]
    )
    return occ_label, occ_dt, occ_pos, occ_bin, sample_of_occ


def _block_mask(d_c: int, drop: frozenset[str]) -> np.ndarray:
    mask = np.ones(3 * d_c)
    if "time" in drop:
        mask[d_c : 2 * d_c] = 0.0
    if "amount" in drop:
        mask[2 * d_c :] = 0.0
    return mask


def assemble_label_tokens(
    batch: Sequence[EncodedSample],
    tables: EmbeddingTables,
    drop: frozenset[str] = frozenset(),
) -> Tensor:
    """Batched per-label token stacks: (B, K+1, D), or (B, K, D) when the ID is dropped.

    Token 0 is the ID embedding; token k carries label k's embedding next to the
    summed dt+position and amount-bin embeddings of its window occurrences.
    """
    _check_drop(drop)
    b = len(batch)
    k = tables.label.shape[0]
    d_c, dim = tables.d_c, tables.dim
    occ_label, occ_dt, occ_pos, occ_bin, sample_of_occ = _gather_occurrences(batch)
    seg = sample_of_occ * k + occ_label

    label_block = take_rows(tables.label, np.tile(np.arange(k), b))
    if "time" in drop:
        time_block = Tensor(np.zeros((b * k, d_c)))
    else:
        rows = take_rows(tables.dt, occ_dt) + take_rows(tables.position, occ_pos)
        time_block = segment_sum(rows, seg, b * k)
    if "amount" in drop:
        amount_block = Tensor(np.zeros((b * k, d_c)))
    else:
        amount_block = segment_sum(take_rows(tables.amount, occ_bin), seg, b * k)

    tokens = concat([label_block, time_block, amount_block], axis=-1).reshape(b, k, dim)
    if tables.absence is not None:
        absent = Tensor(np.stack([s.absent for s in batch])[:, :, None])  # (B, K, 1)
        tokens = tokens + absent * (tables.absence * Tensor(_block_mask(d_c, drop)))
    if "id" in drop:
        return tokens
    id_tokens = take_rows(tables.id, np.array([s.id_idx for s in batch], dtype=np.intp))
    return concat([id_tokens.reshape(b, 1, dim), tokens], axis=1)


def assemble_time_tokens(
    batch: Sequence[EncodedSample],
    tables: EmbeddingTables,
    drop: frozenset[str] = frozenset(),
) -> Tensor:
    """Per-timestamp token stacks (B, tau+1, D) sharing the label-token tables.

    Token 0 is the ID embedding; token p+1 sums the embeddings of everything
    observed at window position p: [sum of labels | dt+position | sum of amounts].
    """
    _check_drop(drop)
    b = len(batch)
    tau = batch[0].step_dt.shape[0] if batch else 0
    d_c, dim = tables.d_c, tables.dim
    occ_label, occ_dt, occ_pos, occ_bin, sample_of_occ = _gather_occurrences(batch)
    seg = sample_of_occ * tau + occ_pos

    label_block = segment_sum(take_rows(tables.label, occ_label), seg, b * tau)
    if "time" in drop:
        time_block = Tensor(np.zeros((b * tau, d_c)))
    else:
        step_dt = np.concatenate([s.step_dt for s in batch])
        time_block = take_rows(tables.dt, step_dt) + take_rows(
            tables.position, np.tile(np.arange(tau), b)
        )
    if "amount" in drop:
        amount_block = Tensor(np.zeros((b * tau, d_c)))
    else:
        amount_block = segment_sum(take_rows(tables.amount, occ_bin), seg, b * tau)

    tokens = concat([label_block, time_block, amount_block], axis=-1).reshape(b, tau, dim)
    if "id" in drop:
        return tokens
    id_tokens = take_rows(tables.id, np.array([s.id_idx for s in batch], dtype=np.intp))
    return concat([id_tokens.reshape(b, 1, dim), tokens], axis=1)


def drop_component(tokens: Tensor, which: str) -> Tensor:
    """Ablate one input component of an assembled token stack.

    ``amount``/``time`` zero the corresponding block in every token;
    ``id`` removes token 0 entirely.
    """
    _check_drop(frozenset([which]))
    if which == "id":
        return tokens[..., 1:, :]
    dim = tokens.shape[-1]
    if dim % 3:
        raise ShapeError(f"token dim {dim} is not 3 equal blocks")
    mask = np.ones(tokens.shape[-2:])
    mask[1:] = _block_mask(dim // 3, frozenset([which]))  # token 0 (ID) has no blocks
    return tokens * Tensor(mask)


def _check_drop(drop: frozenset[str]) -> None:
    unknown = set(drop) - set(COMPONENTS)
    if unknown:
        raise ConfigError(f"unknown component(s) to drop: {sorted(unknown)}")

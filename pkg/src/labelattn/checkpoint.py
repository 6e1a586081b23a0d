"""Versioned model checkpoints.

A checkpoint is a JSON manifest carrying the model config, the fitted
vocabularies, optional amount normalization stats, and every parameter tensor
by name with its shape and a base64 little-endian float64 payload.  Loading is
bit-exact: a round trip reproduces forward passes to the last bit.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import Vocabularies
from .errors import CheckpointError
from .model import Model, ModelConfig, build_model

FORMAT_VERSION = 1


def _encode_array(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii"),
    }


def _decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    if len(raw) % 8:
        raise CheckpointError(f"payload length {len(raw)} is not a whole number of float64s")
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)  # copy; frombuffer is read-only
    expected = int(np.prod(entry["shape"])) if entry["shape"] else 1
    if arr.size != expected:
        raise CheckpointError(
            f"payload holds {arr.size} values but shape {entry['shape']} needs {expected}"
        )
    return arr.reshape(entry["shape"])


def _model_amount_stats(model: Model) -> tuple[np.ndarray, np.ndarray] | None:
    inputs = getattr(model, "inputs", None)
    if inputs is None:
        return None
    return inputs.amount_mean, inputs.amount_std


def save_checkpoint(path, model: Model, vocab: Vocabularies) -> None:
    stats = _model_amount_stats(model)
    payload = {
        "format_version": FORMAT_VERSION,
        "config": model.cfg.to_dict(),
        "vocab": vocab.to_dict(),
        "amount_stats": None
        if stats is None
        else {"mean": _encode_array(stats[0]), "std": _encode_array(stats[1])},
        "params": {name: _encode_array(t.data) for name, t in sorted(model.params().items())},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


@dataclass
class LoadedCheckpoint:
    model: Model
    config: ModelConfig
    vocab: Vocabularies


def load_checkpoint(path) -> LoadedCheckpoint:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {version!r}")
    try:
        cfg = ModelConfig.from_dict(payload["config"])
        vocab = Vocabularies.from_dict(payload["vocab"])
        raw_stats = payload["amount_stats"]
        stats = (
            None
            if raw_stats is None
            else (_decode_array(raw_stats["mean"]), _decode_array(raw_stats["std"]))
        )
        stored = payload["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc

    model = build_model(cfg, vocab, np.random.default_rng(0), amount_stats=stats)
    params = model.params()
    missing = sorted(set(params) - set(stored))
    extra = sorted(set(stored) - set(params))
    if missing or extra:
        raise CheckpointError(
            f"parameter names do not match the rebuilt model; missing {missing}, unexpected {extra}"
        )
    for name, tensor in params.items():
        arr = _decode_array(stored[name])
        if arr.shape != tensor.data.shape:
            raise CheckpointError(
                f"parameter {name!r} has shape {arr.shape}, model expects {tensor.data.shape}"
            )
        tensor.data[...] = arr
    return LoadedCheckpoint(model=model, config=cfg, vocab=vocab)

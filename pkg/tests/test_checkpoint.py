"""Round-trip and corruption handling for checkpoint files."""
import json

import numpy as np
import pytest

from labelattn.checkpoint import load_checkpoint, save_checkpoint
from labelattn.errors import CheckpointError
from test_model import make_model, make_vocab, random_samples


@pytest.mark.parametrize("variant", ["lanet", "gated_attention", "transformer_base", "lstm"])
def test_round_trip_is_bit_exact(tmp_path, variant):
    samples = random_samples(np.random.default_rng(0), 6)
    model = make_model(variant, seed=3, samples=samples)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, model, make_vocab())
    loaded = load_checkpoint(path)

    theirs = loaded.model.params()
    for name, tensor in model.params().items():
        np.testing.assert_array_equal(tensor.data, theirs[name].data)
    np.testing.assert_array_equal(
        model.forward(samples).logits.data, loaded.model.forward(samples).logits.data
    )
    assert loaded.config == model.cfg


def test_save_is_deterministic(tmp_path):
    model = make_model("lanet", seed=1)
    vocab = make_vocab()
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, model, vocab)
    save_checkpoint(b, model, vocab)
    assert a.read_bytes() == b.read_bytes()


def test_vocab_survives_round_trip(tmp_path):
    vocab = make_vocab()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, make_model("lanet"), vocab)
    loaded = load_checkpoint(path).vocab
    assert loaded.labels == vocab.labels
    assert loaded.ids == vocab.ids
    assert loaded.dt_values == vocab.dt_values
    np.testing.assert_array_equal(loaded.amount_edges, vocab.amount_edges)


def _saved_payload(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, make_model("lanet"), make_vocab())
    return path, json.loads(path.read_text())


def test_rejects_unknown_format_version(tmp_path):
    path, payload = _saved_payload(tmp_path)
    payload["format_version"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises(CheckpointError, match="format_version"):
        load_checkpoint(path)


def test_rejects_missing_and_extra_params(tmp_path):
    path, payload = _saved_payload(tmp_path)
    moved = payload["params"].pop("label_table")
    payload["params"]["mystery"] = moved
    path.write_text(json.dumps(payload))
    with pytest.raises(CheckpointError, match="label_table.*mystery"):
        load_checkpoint(path)


def test_rejects_shape_mismatch(tmp_path):
    path, payload = _saved_payload(tmp_path)
    entry = payload["params"]["label_table"]
    entry["shape"] = [1, entry["shape"][0] * entry["shape"][1]]
    path.write_text(json.dumps(payload))
    with pytest.raises(CheckpointError, match="shape"):
        load_checkpoint(path)


def test_rejects_truncated_payload(tmp_path):
    path, payload = _saved_payload(tmp_path)
    entry = payload["params"]["label_table"]
    entry["data"] = entry["data"][: len(entry["data"]) // 2 // 4 * 4]
    path.write_text(json.dumps(payload))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_rejects_garbage_file(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_text("not json {")
    with pytest.raises(CheckpointError, match="cannot read"):
        load_checkpoint(path)

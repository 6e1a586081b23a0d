"""Parameterized layers built on the autodiff tensor: linear, attention, encoder, LSTM."""
from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError
from .tensor import Tensor, dropout, layer_norm, scaled_dot_attention


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    limit = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Linear:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.weight = Tensor(uniform_init(rng, n_in, (n_in, n_out)), requires_grad=True)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias

    def params(self) -> dict[str, Tensor]:
        return {"weight": self.weight, "bias": self.bias}


class LayerNorm:
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, self.eps)

    def params(self) -> dict[str, Tensor]:
        return {"gain": self.gain, "bias": self.bias}


class MultiHeadAttention:
    """Self-attention over (..., T, dim) token stacks with per-head weights retained."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads != 0:
            raise ShapeError(f"token dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)

    def _split_heads(self, x: Tensor) -> Tensor:
        *lead, t, _ = x.shape
        out = x.reshape(*lead, t, self.heads, self.dim // self.heads)
        return out.swapaxes(-3, -2)  # (..., heads, T, head_dim)

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Returns (output (..., T, dim), attention weights (..., heads, T, T))."""
        *lead, t, d = x.shape
        if d != self.dim:
            raise ShapeError(f"expected token dim {self.dim}, got {d}")
        q = self._split_heads(self.wq(x))
        k = self._split_heads(self.wk(x))
        v = self._split_heads(self.wv(x))
        ctx, weights = scaled_dot_attention(q, k, v)
        ctx = ctx.swapaxes(-3, -2).reshape(*lead, t, d)
        return self.wo(ctx), weights

    def params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, lin in (("wq", self.wq), ("wk", self.wk), ("wv", self.wv), ("wo", self.wo)):
            for k, v in lin.params().items():
                out[f"{name}.{k}"] = v
        return out


class EncoderLayer:
    """Post-norm transformer block: attention + residual + norm, then 4x ReLU FFN + residual + norm."""

    def __init__(self, dim: int, heads: int, dropout_p: float, rng: np.random.Generator):
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.norm1 = LayerNorm(dim)
        self.norm2 = LayerNorm(dim)
        self.ff1 = Linear(dim, 4 * dim, rng)
        self.ff2 = Linear(4 * dim, dim, rng)
        self.dropout_p = dropout_p

    def __call__(
        self, x: Tensor, train: bool = False, rng: np.random.Generator | None = None
    ) -> tuple[Tensor, Tensor]:
        att, weights = self.attn(x)
        x = self.norm1(x + dropout(att, self.dropout_p, train, rng))
        ff = self.ff2(self.ff1(x).relu())
        x = self.norm2(x + dropout(ff, self.dropout_p, train, rng))
        return x, weights

    def params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, mod in (
            ("attn", self.attn),
            ("norm1", self.norm1),
            ("norm2", self.norm2),
            ("ff1", self.ff1),
            ("ff2", self.ff2),
        ):
            for k, v in mod.params().items():
                out[f"{name}.{k}"] = v
        return out


class LSTMCell:
    """Standard LSTM cell; gate order i, f, g, o in the packed projection."""

    def __init__(self, n_in: int, n_hidden: int, rng: np.random.Generator):
        self.n_hidden = n_hidden
        self.wx = Tensor(uniform_init(rng, n_in, (n_in, 4 * n_hidden)), requires_grad=True)
        self.wh = Tensor(uniform_init(rng, n_hidden, (n_hidden, 4 * n_hidden)), requires_grad=True)
        self.bias = Tensor(np.zeros(4 * n_hidden), requires_grad=True)

    def __call__(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        nh = self.n_hidden
        z = x @ self.wx + h @ self.wh + self.bias
        i = z[..., :nh].sigmoid()
        f = z[..., nh : 2 * nh].sigmoid()
        g = z[..., 2 * nh : 3 * nh].tanh()
        o = z[..., 3 * nh :].sigmoid()
        c_next = f * c + i * g
        h_next = o * c_next.tanh()
        return h_next, c_next

    def params(self) -> dict[str, Tensor]:
        return {"wx": self.wx, "wh": self.wh, "bias": self.bias}


def prefixed(prefix: str, params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {f"{prefix}.{k}": v for k, v in params.items()}

"""Dense float64 tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy array and records the operations applied to
it.  Calling :meth:`Tensor.backward` on a scalar result walks the recorded
graph once in reverse topological order and accumulates gradients into every
tensor that has ``requires_grad`` set.
"""
from __future__ import annotations

import contextlib
import math

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the ``with`` block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` over axes that were broadcast to produce an array of `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # graph bookkeeping ----------------------------------------------------

    def _accum(self, g) -> None:
        if self.requires_grad:
            if self.grad is None:
                self.grad = np.zeros_like(self.data)
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> int:
        """Backpropagate from a scalar; returns the number of graph nodes visited.

        Every node reachable from this tensor is visited exactly once.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() requires a scalar, got shape {self.data.shape}")
        order = toposort(self)
        self.grad = np.ones_like(self.data)
        visits = 0
        for node in reversed(order):
            if node._backward is not None:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node._backward()
            visits += 1
        return visits

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data + other.data)
        if _track(self, other):

            def bw():
                self._accum(_unbroadcast(out.grad, self.data.shape))
                other._accum(_unbroadcast(out.grad, other.data.shape))

            _attach(out, (self, other), bw)
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data * other.data)
        if _track(self, other):

            def bw():
                self._accum(_unbroadcast(out.grad * other.data, self.data.shape))
                other._accum(_unbroadcast(out.grad * self.data, other.data.shape))

            _attach(out, (self, other), bw)
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor) or isinstance(scalar, np.ndarray):
            raise ShapeError("tensor division supports scalar divisors only")
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        other = as_tensor(other)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeError("matmul operands must have at least 2 dimensions")
        out = Tensor(self.data @ other.data)
        if _track(self, other):

            def bw():
                g = out.grad
                self._accum(_unbroadcast(g @ np.swapaxes(other.data, -1, -2), self.data.shape))
                other._accum(_unbroadcast(np.swapaxes(self.data, -1, -2) @ g, other.data.shape))

            _attach(out, (self, other), bw)
        return out

    # shape ops ------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor(self.data.reshape(shape))
        if _track(self):

            def bw():
                self._accum(out.grad.reshape(self.data.shape))

            _attach(out, (self,), bw)
        return out

    def swapaxes(self, a: int, b: int):
        out = Tensor(np.swapaxes(self.data, a, b))
        if _track(self):

            def bw():
                self._accum(np.swapaxes(out.grad, a, b))

            _attach(out, (self,), bw)
        return out

    def __getitem__(self, key):
        # Basic (slice/int/tuple-of-slices) indexing only: the gradient is
        # scattered back through the same view.
        out = Tensor(self.data[key])
        if _track(self):

            def bw():
                if self.grad is None:
                    self.grad = np.zeros_like(self.data)
                self.grad[key] += out.grad

            _attach(out, (self,), bw)
        return out

    # reductions -----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims))
        if _track(self):

            def bw():
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accum(np.broadcast_to(g, self.data.shape))

            _attach(out, (self,), bw)
        return out

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    # elementwise nonlinearities --------------------------------------------

    def relu(self):
        mask = self.data > 0
        out = Tensor(np.where(mask, self.data, 0.0))
        if _track(self):

            def bw():
                self._accum(out.grad * mask)

            _attach(out, (self,), bw)
        return out

    def sigmoid(self):
        s = expit(self.data)
        out = Tensor(s)
        if _track(self):

            def bw():
                self._accum(out.grad * s * (1.0 - s))

            _attach(out, (self,), bw)
        return out

    def tanh(self):
        t = np.tanh(self.data)
        out = Tensor(t)
        if _track(self):

            def bw():
                self._accum(out.grad * (1.0 - t * t))

            _attach(out, (self,), bw)
        return out

    def exp(self):
        e = np.exp(self.data)
        out = Tensor(e)
        if _track(self):

            def bw():
                self._accum(out.grad * e)

            _attach(out, (self,), bw)
        return out

    def log(self):
        out = Tensor(np.log(self.data))
        if _track(self):

            def bw():
                self._accum(out.grad / self.data)

            _attach(out, (self,), bw)
        return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _track(*tensors: Tensor) -> bool:
    return _grad_enabled and any(t.requires_grad for t in tensors)


def _attach(out: Tensor, parents: tuple[Tensor, ...], backward) -> None:
    out.requires_grad = True
    out._parents = parents
    out._backward = backward


def toposort(root: Tensor) -> list[Tensor]:
    """Ancestors of `root` ordered parents-first (root last)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


# gather / scatter ----------------------------------------------------------


def take_rows(table: Tensor, idx) -> Tensor:
    """Select rows `idx` from a 2-d table; gradients accumulate into those rows."""
    idx = np.asarray(idx, dtype=np.intp)
    out = Tensor(table.data[idx])
    if _track(table):

        def bw():
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, out.grad)

        _attach(out, (table,), bw)
    return out


def segment_sum(x: Tensor, segment_ids, n_segments: int) -> Tensor:
    """Sum rows of `x` into `n_segments` buckets keyed by `segment_ids`."""
    seg = np.asarray(segment_ids, dtype=np.intp)
    if x.ndim != 2 or seg.shape != (x.shape[0],):
        raise ShapeError("segment_sum expects x (m, d) and one segment id per row")
    data = np.zeros((n_segments, x.shape[1]))
    np.add.at(data, seg, x.data)
    out = Tensor(data)
    if _track(x):

        def bw():
            x._accum(out.grad[seg])

        _attach(out, (x,), bw)
    return out


def broadcast_to(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(np.broadcast_to(x.data, shape).copy())
    if _track(x):

        def bw():
            x._accum(_unbroadcast(out.grad, x.data.shape))

        _attach(out, (x,), bw)
    return out


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    if _track(*tensors):
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum(sizes)[:-1]

        def bw():
            pieces = np.split(out.grad, offsets, axis=axis)
            for t, g in zip(tensors, pieces):
                t._accum(g)

        _attach(out, tuple(tensors), bw)
    return out


# fused ops ------------------------------------------------------------------


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax along the last axis; rows sum to one."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s)
    if _track(x):

        def bw():
            g = out.grad
            x._accum(s * (g - (g * s).sum(axis=-1, keepdims=True)))

        _attach(out, (x,), bw)
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean/unit variance, then scale and shift."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError("layer_norm gain/bias must match the last axis")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    istd = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * istd
    out = Tensor(gain.data * xhat + bias.data)
    if _track(x, gain, bias):

        def bw():
            g = out.grad
            lead = tuple(range(g.ndim - 1))
            gain._accum((g * xhat).sum(axis=lead))
            bias._accum(g.sum(axis=lead))
            dxhat = g * gain.data
            x._accum(
                istd
                * (
                    dxhat
                    - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
                )
            )

        _attach(out, (x, gain, bias), bw)
    return out


def dropout(x: Tensor, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Zero entries with probability `p` and rescale by 1/(1-p) during training."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    out = Tensor(x.data * keep)
    if _track(x):

        def bw():
            x._accum(out.grad * keep)

        _attach(out, (x,), bw)
    return out


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Mean binary cross-entropy over all entries, computed from raw logits.

    Uses the overflow-safe form max(z,0) - z*y + log(1+exp(-|z|)).
    """
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != logits.shape:
        raise ShapeError(f"targets shape {y.shape} != logits shape {logits.shape}")
    z = logits.data
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    out = Tensor(loss.mean())
    if _track(logits):

        def bw():
            logits._accum(out.grad * (expit(z) - y) / y.size)

        _attach(out, (logits,), bw)
    return out


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> tuple[Tensor, Tensor]:
    """Attention over the last two axes: softmax(q k^T / sqrt(d)) v.

    Returns (output, weights); weight rows sum to one.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError("q and k must share the last dimension")
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(q.shape[-1]))
    weights = softmax_rows(scores)
    return weights @ v, weights

"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

A ``Tape`` records operations in execution order; since every input of an op
already exists when the op runs, execution order is a topological order and
``Tape.backward`` is a single reversed sweep that visits each node exactly
once. Tensors are thin wrappers around ``numpy.ndarray``; only ops whose
output participates in a gradient path are recorded.

Broadcasting follows numpy rules (scalars and per-row/per-column vectors in
practice); backward reduces gradients back to each operand's shape.
"""

from __future__ import annotations

import threading

import numpy as np
from scipy.special import erf

from .errors import ContractError, DimensionError

_state = threading.local()


def _active_tape():
    return getattr(_state, "tape", None)


class Tensor:
    """Dense float64 array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "_grad", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self._grad = None
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def grad(self):
        """Accumulated gradient; zeros for a grad-tracked tensor never touched
        by backward (e.g. created outside the tape)."""
        if self._grad is None and self.requires_grad:
            return np.zeros_like(self.data)
        return self._grad

    def zero_grad(self):
        self._grad = None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def _accumulate(self, g):
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        self._grad += g

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return mul(self, _wrap(-1.0))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("division only by python scalars")
        return mul(self, _wrap(1.0 / float(other)))

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


class Tape:
    """Execution-ordered op record; one backward sweep per tape."""

    def __init__(self):
        self._nodes = []  # (out Tensor, backward closure)
        self._done = False

    def __enter__(self):
        if _active_tape() is not None:
            raise ContractError("tapes do not nest")
        _state.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _state.tape = None
        return False

    def _record(self, out: Tensor, backward):
        out._tape = self
        self._nodes.append((out, backward))

    def backward(self, loss: Tensor):
        """Populate gradients of every tensor reachable from ``loss``."""
        if self._done:
            raise ContractError("backward already ran on this tape; use a fresh tape")
        if loss.data.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.data.shape}")
        if loss._tape is not self:
            raise ContractError("loss was not recorded on this tape")
        self._done = True
        loss._accumulate(np.ones_like(loss.data))
        for out, backward in reversed(self._nodes):
            if out._grad is not None:
                backward(out._grad)


def _record(out: Tensor, inputs, backward):
    tape = _active_tape()
    out.requires_grad = any(t.requires_grad for t in inputs)
    if tape is not None and out.requires_grad:
        tape._record(out, backward)
    return out


def _sum_to_shape(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (gd, sd) in enumerate(zip(g.shape, shape)):
        if sd == 1 and gd != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor):
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise DimensionError(
            f"incompatible shapes {a.data.shape} and {b.data.shape}"
        ) from None


# -- elementwise --------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    out = Tensor(a.data + b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_sum_to_shape(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_sum_to_shape(g, b.data.shape))

    return _record(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    out = Tensor(a.data - b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_sum_to_shape(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_sum_to_shape(-g, b.data.shape))

    return _record(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    out = Tensor(a.data * b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_sum_to_shape(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_sum_to_shape(g * a.data, b.data.shape))

    return _record(out, (a, b), backward)


# -- linear algebra ------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul operands must have ndim >= 2")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"inner dimensions differ: {a.data.shape} @ {b.data.shape}"
        )
    out = Tensor(a.data @ b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_sum_to_shape(g @ b.data.swapaxes(-1, -2), a.data.shape))
        if b.requires_grad:
            b._accumulate(_sum_to_shape(a.data.swapaxes(-1, -2) @ g, b.data.shape))

    return _record(out, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    if a.ndim < 2:
        raise DimensionError("transpose needs ndim >= 2")
    out = Tensor(a.data.swapaxes(-1, -2))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.swapaxes(-1, -2))

    return _record(out, (a,), backward)


def gather_rows(table: Tensor, ids) -> Tensor:
    """Row lookup ``table[ids]``; backward scatter-adds into the table."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise DimensionError("gather_rows expects a 2-D table")
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        bad = ids[(ids < 0) | (ids >= table.data.shape[0])][0]
        raise IndexError(f"row id {bad} out of range for table with {table.data.shape[0]} rows")
    out = Tensor(table.data[ids])

    def backward(g):
        if table.requires_grad:
            dt = np.zeros_like(table.data)
            np.add.at(dt, ids, g)
            table._accumulate(dt)

    return _record(out, (table,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t._accumulate(piece)

    return _record(out, tensors, backward)


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return _record(out, (a,), backward)


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice [start:stop] along the last axis."""
    out = Tensor(a.data[..., start:stop])

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[..., start:stop] = g
            a._accumulate(full)

    return _record(out, (a,), backward)


def take_position(a: Tensor, pos: int) -> Tensor:
    """Select index ``pos`` along the second-to-last axis (e.g. one sequence
    position from a batch of encoded sequences)."""
    if a.ndim < 2:
        raise DimensionError("take_position needs ndim >= 2")
    out = Tensor(a.data[..., pos, :])

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[..., pos, :] = g
            a._accumulate(full)

    return _record(out, (a,), backward)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(gg, a.data.shape).copy())

    return _record(out, (a,), backward)


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(reduce_sum(a, axis=axis, keepdims=keepdims), _wrap(1.0 / n))


# -- nonlinearities ------------------------------------------------------


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0.0))

    return _record(out, (a,), backward)


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a: Tensor) -> Tensor:
    """Exact gaussian-error-linear unit x·Φ(x)."""
    phi = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    out = Tensor(a.data * phi)

    def backward(g):
        if a.requires_grad:
            pdf = _INV_SQRT2PI * np.exp(-0.5 * a.data * a.data)
            a._accumulate(g * (phi + a.data * pdf))

    return _record(out, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if not -a.ndim <= axis < a.ndim:
        raise DimensionError(f"softmax axis {axis} invalid for shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s)

    def backward(g):
        if a.requires_grad:
            dot = (g * s).sum(axis=axis, keepdims=True)
            a._accumulate(s * (g - dot))

    return _record(out, (a,), backward)


def layernorm(a: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Normalize to zero mean / unit variance along ``axis`` (no affine)."""
    if not -a.ndim <= axis < a.ndim:
        raise DimensionError(f"layernorm axis {axis} invalid for shape {a.data.shape}")
    mu = a.data.mean(axis=axis, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(xhat)

    def backward(g):
        if a.requires_grad:
            gm = g.mean(axis=axis, keepdims=True)
            gx = (g * xhat).mean(axis=axis, keepdims=True)
            a._accumulate((g - gm - xhat * gx) * inv)

    return _record(out, (a,), backward)


def dropout(a: Tensor, rate: float, train: bool, seed: int, stream: int, step: int) -> Tensor:
    """Inverted dropout with a counter-based stream keyed by (seed, stream, step).

    The same key always yields the same mask, so training runs are replayable.
    Identity when ``train`` is false or rate is 0.
    """
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return a
    key = np.array([np.uint64(seed), (np.uint64(stream) << np.uint64(32)) | np.uint64(step)],
                   dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    out = Tensor(a.data * mask)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _record(out, (a,), backward)


def cross_entropy_with_logits(logits: Tensor, target_ids) -> Tensor:
    """Mean negative log-softmax of the target column, over the full row."""
    ids = np.asarray(target_ids, dtype=np.int64)
    if logits.ndim != 2:
        raise DimensionError("logits must be 2-D (batch × vocabulary)")
    n, v = logits.data.shape
    if ids.shape != (n,):
        raise DimensionError(f"expected {n} targets, got shape {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= v):
        raise IndexError("target id out of vocabulary range")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    out = Tensor(np.array(-logp[np.arange(n), ids].mean()))

    def backward(g):
        if logits.requires_grad:
            p = np.exp(logp)
            p[np.arange(n), ids] -= 1.0
            logits._accumulate(g * p / n)

    return _record(out, (logits,), backward)

"""Differentiable tensor operations.

Each op computes its forward value with NumPy and, when a tape is active and
any input requires gradients, records a closure producing the input
gradients from the output gradient.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ContractError, NumericError, ShapeError
from .tensor import Tensor, as_tensor, current_tape, get_dtype


def _result(data: np.ndarray, parents: tuple[Tensor, ...], rule) -> Tensor:
    out = Tensor(data)
    tape = current_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape.record(out, parents, rule)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return _result(out, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * out / b.data, b.shape)))


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a: Tensor) -> Tensor:
    # tanh form is overflow-free for large |x|
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _result(y, (a,), lambda g: (g * y,))


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise NumericError("log of a non-positive value")
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def relu(a: Tensor) -> Tensor:
    keep = a.data > 0
    return _result(np.where(keep, a.data, 0.0), (a,), lambda g: (np.where(keep, g, 0.0),))


def clamp_min(a: Tensor, lo: float) -> Tensor:
    keep = a.data > lo
    return _result(np.where(keep, a.data, lo), (a,), lambda g: (np.where(keep, g, 0.0),))


def where(cond: np.ndarray, a, b) -> Tensor:
    """Select from ``a`` where ``cond`` holds, else from ``b`` (no grad to ``cond``)."""
    a, b = as_tensor(a), as_tensor(b)
    cond = np.asarray(cond, dtype=bool)
    out = np.where(cond, a.data, b.data)
    return _result(out, (a, b),
                   lambda g: (_unbroadcast(np.where(cond, g, 0.0), a.shape),
                              _unbroadcast(np.where(cond, 0.0, g), b.shape)))


# -- reductions --------------------------------------------------------------

def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)

    return _result(np.asarray(out), (a,), rule)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def masked_mean(x: Tensor, mask: np.ndarray) -> Tensor:
    """Mean over axis 1 of ``x[b, t, f]`` counting only steps where ``mask[b, t]``."""
    mask = np.asarray(mask, dtype=bool)
    if x.ndim != 3 or mask.shape != x.shape[:2]:
        raise ShapeError(f"masked_mean expects x[b,t,f] and mask[b,t]; got {x.shape} and {mask.shape}")
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        raise ContractError("masked_mean over a sequence with no valid steps")
    m = mask[:, :, None]
    scale = (1.0 / counts).astype(x.data.dtype)[:, None]
    out = np.where(m, x.data, 0.0).sum(axis=1) * scale
    return _result(out, (x,), lambda g: (np.where(m, (g * scale)[:, None, :], 0.0),))


# -- linear algebra and shape ------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")

    def rule(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(np.matmul(a.data, b.data), (a, b), rule)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    return _result(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a: Tensor, shape) -> Tensor:
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def index(a: Tensor, key) -> Tensor:
    """Basic (slice/int) indexing."""
    def rule(g):
        full = np.zeros_like(a.data)
        full[key] = g
        return (full,)

    return _result(a.data[key], (a,), rule)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors),
                   lambda g: tuple(np.split(g, splits, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def rule(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _result(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), rule)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"token id out of range for table with {table.shape[0]} rows")

    def rule(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (full,)

    return _result(table.data[ids], (table,), rule)


def pick(a: Tensor, ids: np.ndarray) -> Tensor:
    """``out[..., ] = a[..., ids[...]]`` along the last axis."""
    ids = np.asarray(ids, dtype=np.int64)[..., None]

    def rule(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, ids, g[..., None], axis=-1)
        return (full,)

    return _result(np.take_along_axis(a.data, ids, axis=-1)[..., 0], (a,), rule)


# -- activations -------------------------------------------------------------

def softmax(a: Tensor) -> Tensor:
    if np.isnan(a.data).any():
        raise NumericError("softmax input contains NaN")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    return _result(y, (a,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),))


def log_softmax(a: Tensor) -> Tensor:
    if np.isnan(a.data).any():
        raise NumericError("log_softmax input contains NaN")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    return _result(y, (a,), lambda g: (g - np.exp(y) * g.sum(axis=-1, keepdims=True),))


def maxout(a: Tensor, pieces: int) -> Tensor:
    """Elementwise max over ``pieces`` contiguous blocks of the last axis."""
    n = a.shape[-1]
    if pieces < 1 or n % pieces:
        raise ShapeError(f"maxout: last dimension {n} not divisible by {pieces} pieces")
    d = n // pieces
    blocks = a.data.reshape(a.shape[:-1] + (pieces, d))
    arg = blocks.argmax(axis=-2)[..., None, :]
    out = np.take_along_axis(blocks, arg, axis=-2)[..., 0, :]

    def rule(g):
        full = np.zeros_like(blocks)
        np.put_along_axis(full, arg, g[..., None, :], axis=-2)
        return (full.reshape(a.shape),)

    return _result(out, (a,), rule)


def l2_normalize(a: Tensor, axis: int = -1) -> Tensor:
    norm = np.sqrt((a.data * a.data).sum(axis=axis, keepdims=True))
    if np.any(norm == 0):
        raise NumericError("l2_normalize of a zero vector")
    y = a.data / norm
    return _result(y, (a,), lambda g: ((g - y * (g * y).sum(axis=axis, keepdims=True)) / norm,))


# -- recurrent cell ----------------------------------------------------------

def gru_step(x_proj: Tensor, h: Tensor, w_hrz: Tensor, w_hn: Tensor) -> Tensor:
    """One GRU update given the precomputed input projection ``x W_x + b``.

    Gate layout along the last axis of ``x_proj`` is [reset | update | candidate].
    """
    size = h.shape[-1]
    if x_proj.shape[-1] != 3 * size:
        raise ShapeError(f"gru: input projection {x_proj.shape} does not match hidden {h.shape}")
    hrz = matmul(h, w_hrz)
    r = sigmoid(add(x_proj[..., :size], hrz[..., :size]))
    z = sigmoid(add(x_proj[..., size:2 * size], hrz[..., size:]))
    n = tanh(add(x_proj[..., 2 * size:], matmul(mul(r, h), w_hn)))
    # h' = z*h + (1-z)*n
    return add(n, mul(z, sub(h, n)))


def gru_cell(x: Tensor, h: Tensor, params) -> Tensor:
    """GRU cell; ``params`` maps ``w_x``, ``w_hrz``, ``w_hn``, ``b`` to tensors."""
    w_x = params["w_x"]
    if x.shape[-1] != w_x.shape[0] or h.shape[-1] != params["w_hn"].shape[0]:
        raise ShapeError(f"gru_cell: x {x.shape} / h {h.shape} incompatible with W_x {w_x.shape}")
    return gru_step(add(matmul(x, w_x), params["b"]), h, params["w_hrz"], params["w_hn"])


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=get_dtype()))

"""
Dense tensors and the define-by-run tape used for reverse-mode autodiff.

A :class:`Tensor` is a thin wrapper around a contiguous NumPy array. When a
:class:`Tape` is active (``with Tape() as tape:``) every differentiable op whose
inputs include a tensor with ``requires_grad`` appends an entry to the tape.
``tape.backward(loss)`` then walks the entries in reverse order.

Floating point precision is a process-wide switch (:func:`set_precision`); it
is never chosen per op.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError

_PRECISIONS = {"float64": np.float64, "float32": np.float32}
_dtype = np.float64
_local = threading.local()


def set_precision(name: str) -> None:
    global _dtype
    if name not in _PRECISIONS:
        raise ValueError(f"unknown precision {name!r}; expected one of {sorted(_PRECISIONS)}")
    _dtype = _PRECISIONS[name]


def get_precision() -> str:
    return np.dtype(_dtype).name


def get_dtype():
    return _dtype


@contextmanager
def precision(name: str):
    """Temporarily switch the global precision."""
    previous = get_precision()
    set_precision(name)
    try:
        yield
    finally:
        set_precision(previous)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=_dtype)
        # ascontiguousarray would promote 0-d scalars to shape (1,)
        self.data = arr if arr.flags.c_contiguous else np.ascontiguousarray(arr)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # Operators delegate to ops; imported lazily to avoid a cycle.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, key):
        from . import ops
        return ops.index(self, key)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


BackwardRule = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tape:
    """Ordered record of differentiable operations.

    Entries are appended as ops execute, so an entry's operands always precede
    it. A tape is single-threaded; use one tape per execution lane.
    """

    def __init__(self):
        self.entries: list[tuple[Tensor, tuple[Tensor, ...], BackwardRule]] = []

    def __len__(self) -> int:
        return len(self.entries)

    def __enter__(self) -> "Tape":
        stack = _tape_stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        stack.pop()

    def record(self, out: Tensor, parents: tuple[Tensor, ...], rule: BackwardRule) -> None:
        self.entries.append((out, parents, rule))

    def backward(self, loss: Tensor, params: Iterable[Tensor] | None = None) -> dict[int, np.ndarray]:
        """Propagate d(loss)/d(x) back through the recorded entries.

        Gradients of leaf tensors are written to ``.grad`` (overwriting any
        previous value). When ``params`` is given, every listed tensor gets a
        gradient, zero if the loss does not depend on it.
        """
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        produced = set()
        leaves: dict[int, Tensor] = {}
        for out, parents, _ in self.entries:
            produced.add(id(out))
            for p in parents:
                if p.requires_grad and id(p) not in produced:
                    leaves[id(p)] = p

        for out, parents, rule in reversed(self.entries):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for p, pg in zip(parents, rule(g)):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                prev = grads.get(key)
                grads[key] = pg if prev is None else prev + pg

        targets = leaves if params is None else {id(p): p for p in params}
        for key, p in targets.items():
            g = grads.get(key)
            p.grad = np.zeros_like(p.data) if g is None else np.array(g, dtype=p.data.dtype).reshape(p.shape)
        return {k: grads[k] for k in targets if k in grads}


def _tape_stack() -> list[Tape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def current_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def no_tape():
    """Evaluate ops without recording, even inside an active tape."""
    saved = list(_tape_stack())
    _local.stack = []
    try:
        yield
    finally:
        _local.stack = saved

"""Central finite-difference checks against the tape's analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor, no_tape


def numerical_gradient(f: Callable[[], Tensor], x: Tensor, h: float = 1e-5,
                       coords: np.ndarray | None = None) -> np.ndarray:
    """d f / d x by central differences; ``f`` re-reads ``x.data`` each call.

    Only the flat positions in ``coords`` are evaluated (all by default);
    the rest stay zero.
    """
    grad = np.zeros(x.size, dtype=np.float64)
    flat = x.data.reshape(-1)
    positions = range(x.size) if coords is None else coords
    with no_tape():
        for i in positions:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().data.sum())
            flat[i] = orig - h
            fm = float(f().data.sum())
            flat[i] = orig
            grad[i] = (fp - fm) / (2 * h)
    return grad.reshape(x.shape)


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-10) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)


def analytic_gradients(f: Callable[[], Tensor], inputs: Sequence[Tensor]) -> list[np.ndarray]:
    with Tape() as tape:
        out = f()
        loss = out if out.size == 1 else _total(out)
    tape.backward(loss, params=inputs)
    return [x.grad.copy() for x in inputs]


def _total(t: Tensor) -> Tensor:
    from . import ops
    return ops.sum(t)


def gradient_check(f: Callable[[], Tensor], inputs: Sequence[Tensor], h: float = 1e-5,
                   max_coords: int | None = None, rng: np.random.Generator | None = None) -> list[float]:
    """Relative error between analytic and numerical gradients of sum(f()) per input.

    With ``max_coords`` set, each input is probed at that many random positions.
    """
    analytic = analytic_gradients(f, inputs)
    errors = []
    for x, ga in zip(inputs, analytic):
        coords = None
        if max_coords is not None and x.size > max_coords:
            rng = rng or np.random.default_rng(0)
            coords = np.sort(rng.choice(x.size, size=max_coords, replace=False))
        gn = numerical_gradient(f, x, h=h, coords=coords)
        if coords is not None:
            ga = ga.reshape(-1)[coords]
            gn = gn.reshape(-1)[coords]
        errors.append(relative_error(ga, gn))
    return errors

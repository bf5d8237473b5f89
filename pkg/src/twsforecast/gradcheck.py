"""Central finite-difference checks for tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor, backward

STEP = 1e-5
REL_TOL = 1e-4
FLOOR = 1e-8


def numeric_grad(f: Callable[[], float], x: np.ndarray, h: float = STEP) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. the array ``x``, perturbed in place."""
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = FLOOR) -> float:
    """``|a - n| / max(|a|, |n|, floor)`` in the Euclidean norm over the whole array."""
    a, n = np.ravel(analytic), np.ravel(numeric)
    denom = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / denom)


def gradients(loss_fn: Callable[[], Tensor], leaves: Sequence[Tensor],
              h: float = STEP) -> list[tuple[np.ndarray, np.ndarray]]:
    """(tape gradient, finite-difference gradient) for each leaf."""
    with Tape() as tape:
        loss = loss_fn()
    backward(tape, loss, leaves)
    out = []
    for leaf in leaves:
        analytic = leaf.grad.copy()
        out.append((analytic, numeric_grad(lambda: loss_fn().item(), leaf.data, h)))
    return out


def joint_error(pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    """Relative error with all leaves' gradients concatenated into one vector."""
    return relative_error(np.concatenate([a.ravel() for a, _ in pairs]),
                          np.concatenate([n.ravel() for _, n in pairs]))


def check(loss_fn: Callable[[], Tensor], leaves: Sequence[Tensor], h: float = STEP) -> list[float]:
    """Relative error between tape and finite-difference gradients, one per leaf."""
    return [relative_error(a, n) for a, n in gradients(loss_fn, leaves, h)]

"""Dense float64 arrays with a reverse-mode gradient tape.

Operations run eagerly on numpy buffers. While a :class:`Tape` is active, every
operation whose inputs require gradients is appended to it; :func:`backward`
replays the tape in reverse to populate ``grad`` on the leaves.

    >>> w = Tensor(np.ones((2, 2)), requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = (w * w).sum()
    >>> backward(tape, loss)
    >>> w.grad
    array([[2., 2.],
           [2., 2.]])
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "NumericError",
    "backward",
    "matmul",
    "affine",
    "softmax",
    "layer_norm",
    "gelu",
    "dropout",
    "concat",
    "broadcast_to",
    "active_tape",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class NumericError(ArithmeticError):
    """A forward value became NaN or infinite."""


_TAPES: list["Tape"] = []


def active_tape() -> "Tape | None":
    return _TAPES[-1] if _TAPES else None


@dataclass
class TapeEntry:
    op: str
    inputs: tuple["Tensor", ...]
    output: "Tensor"
    # maps grad_output -> one grad per input (None for inputs not needing one)
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    entries: list[TapeEntry] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.entries)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64, copy=True)
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr if type(arr) is np.ndarray and arr.dtype == np.float64 else np.asarray(arr, dtype=np.float64)
        t.requires_grad = False
        t.grad = None
        t.name = None
        return t

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
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor._wrap(np.asarray(x, dtype=np.float64))


_add_reduce = np.add.reduce


def _check_finite(arr: np.ndarray, op: str) -> None:
    # a finite sum proves every entry finite; only an inf/nan sum needs the full scan
    if not math.isfinite(_add_reduce(arr, None)) and not np.isfinite(arr).all():
        raise NumericError(f"{op} produced non-finite values")


def _record(op: str, inputs: tuple[Tensor, ...], out: np.ndarray, vjp) -> Tensor:
    _check_finite(out, op)
    result = Tensor._wrap(out)
    if _TAPES and any(t.requires_grad for t in inputs):
        result.requires_grad = True
        _TAPES[-1].entries.append(TapeEntry(op, inputs, result, vjp))
    return result


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# elementwise ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _record("add", (a, b), a.data + b.data,
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _record("sub", (a, b), a.data - b.data,
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _record("mul", (a, b), ad * bd,
                   lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return _record("scale", (a,), a.data * factor, lambda g: (g * factor,))


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _record("square", (a,), ad * ad, lambda g: (2.0 * ad * g,))


def gelu(a: Tensor) -> Tensor:
    """Exact (erf) GELU."""
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return _record("gelu", (a,), x * cdf, lambda g: (g * (cdf + x * pdf),))


# shape ops -------------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    src = a.shape
    try:
        out = a.data.reshape(shape).copy()
    except ValueError as err:
        raise ShapeError(f"cannot reshape {src} to {shape}") from err
    return _record("reshape", (a,), out, lambda g: (g.reshape(src),))


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return _record("transpose", (a,), np.transpose(a.data, axes).copy(),
                   lambda g: (np.transpose(g, inv),))


def take(a: Tensor, index) -> Tensor:
    """Basic (slice/int) indexing; the result is a copy."""
    src = a.shape
    out = np.array(a.data[index], copy=True)

    def vjp(g):
        full = np.zeros(src)
        full[index] = g
        return (full,)

    return _record("slice", (a,), out, vjp)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as err:
        raise ShapeError(str(err)) from err
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _record("concat", tensors, out, lambda g: tuple(np.split(g, bounds, axis=axis)))


def broadcast_to(a: Tensor, shape) -> Tensor:
    src = a.shape
    try:
        out = np.broadcast_to(a.data, shape).copy()
    except ValueError as err:
        raise ShapeError(f"cannot broadcast {src} to {shape}") from err
    return _record("broadcast", (a,), out, lambda g: (_unbroadcast(g, src),))


# reductions ------------------------------------------------------------------


def _expand(g: np.ndarray, src: tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, src)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    src = a.shape
    return _record("sum", (a,), np.asarray(a.data.sum(axis=axis, keepdims=keepdims)),
                   lambda g: (_expand(g, src, axis, keepdims).copy(),))


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    src = a.shape
    n = a.size if axis is None else int(np.prod([src[i] for i in np.atleast_1d(axis)]))
    return _record("mean", (a,), np.asarray(a.data.mean(axis=axis, keepdims=keepdims)),
                   lambda g: (_expand(g, src, axis, keepdims) / n,))


# linear algebra / nn ---------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch broadcasting over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def vjp(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return _record("matmul", (a, b), ad @ bd, vjp)


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """``x @ weight + bias`` as one tape entry; ``weight`` is (in, out), ``bias`` is (out,)."""
    xd, wd = x.data, weight.data
    if xd.shape[-1] != wd.shape[0] or bias.shape != (wd.shape[1],):
        raise ShapeError(f"affine shape mismatch: {x.shape} @ {weight.shape} + {bias.shape}")

    def vjp(g):
        gx = g @ wd.T if x.requires_grad else None
        flat_x, flat_g = xd.reshape(-1, xd.shape[-1]), g.reshape(-1, g.shape[-1])
        return gx, flat_x.T @ flat_g, flat_g.sum(axis=0)

    return _record("affine", (x, weight, bias), xd @ wd + bias.data, vjp)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    y = e / e.sum(axis=axis, keepdims=True)
    return _record("softmax", (a,), y,
                   lambda g: (y * (g - (g * y).sum(axis=axis, keepdims=True)),))


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply ``gain`` and ``bias``."""
    if gain.shape != (a.shape[-1],) or bias.shape != (a.shape[-1],):
        raise ShapeError(f"layer_norm affine shape {gain.shape}/{bias.shape} vs {a.shape}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gd = gain.data

    def vjp(g):
        dxhat = g * gd
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(x.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _record("layer_norm", (a, gain, bias), xhat * gd + bias.data, vjp)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    if not training or rate <= 0.0:
        return a
    if rng is None:
        raise ValueError("training-mode dropout needs a generator")
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _record("dropout", (a,), a.data * keep, lambda g: (g * keep,))


# backward --------------------------------------------------------------------


def backward(tape: Tape, loss: Tensor, leaves: Sequence[Tensor] = ()) -> None:
    """Populate ``grad`` on every grad-requiring leaf of ``tape``.

    ``grad`` is overwritten, not accumulated. Leaves listed in ``leaves`` that
    the loss never touched get a zero gradient.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    produced = {id(e.output): i for i, e in enumerate(tape.entries)}
    if id(loss) not in produced:
        raise ValueError("loss was not produced on this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    found: dict[int, Tensor] = {}
    for leaf in leaves:
        found[id(leaf)] = leaf
    for entry in reversed(tape.entries[: produced[id(loss)] + 1]):
        g = grads.pop(id(entry.output), None)
        for t in entry.inputs:
            if t.requires_grad and id(t) not in produced:
                found[id(t)] = t
        if g is None:
            continue
        for t, gi in zip(entry.inputs, entry.vjp(g)):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = np.array(gi, dtype=np.float64)
    for key, leaf in found.items():
        g = grads.get(key)
        leaf.grad = np.zeros(leaf.shape) if g is None else g.reshape(leaf.shape)

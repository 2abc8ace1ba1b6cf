"""Define-by-run reverse-mode differentiation over dense float64 arrays.

Forward values are computed eagerly. While a :class:`Tape` is active, every
operation whose inputs require gradients is appended to it together with its
backward rule, and :func:`backward` sweeps the tape in reverse.

Complex quantities are carried as separate real and imaginary tensors; see
:func:`cmul`.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

_uid = itertools.count()
_local = threading.local()


def _stack() -> list["Tape"]:
    # tapes are single-threaded; each thread records onto its own stack
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an op."""

    def __init__(self, op: str, shapes: Sequence[tuple], detail: str = ""):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        msg = f"{op}: incompatible shapes {self.shapes}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class GradientError(ValueError):
    pass


class Tensor:
    """A dense real array that may participate in a recorded computation."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 is_param: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad or is_param)
        self.is_param = is_param
        self.name = name
        self.uid = next(_uid)
        self.tape: Tape | None = None

    @classmethod
    def parameter(cls, data, name: str) -> "Tensor":
        return cls(np.array(data, dtype=np.float64), name=name, is_param=True)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def node_id(self) -> int | None:
        return self.uid if self.tape is not None else None

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


@dataclass
class _Op:
    kind: str
    inputs: tuple[Tensor, ...]
    outputs: tuple[Tensor, ...]
    forward: Callable
    backward: Callable
    multi: bool


class Tape:
    """Ordered record of operations; use as a context manager."""

    def __init__(self):
        self.ops: list[_Op] = []

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().remove(self)

    def __len__(self) -> int:
        return len(self.ops)

    def parameters(self) -> list[Tensor]:
        seen: dict[int, Tensor] = {}
        for op in self.ops:
            for t in op.inputs:
                if t.is_param and t.uid not in seen:
                    seen[t.uid] = t
        return list(seen.values())

    def replay(self) -> list[tuple[np.ndarray, ...]]:
        """Re-execute every recorded forward rule on the recorded inputs."""
        out = []
        for op in self.ops:
            res = op.forward(*(t.data for t in op.inputs))
            out.append(res if op.multi else (res,))
        return out


def active_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def record(kind: str, inputs: Sequence, forward: Callable, backward: Callable):
    """Evaluate ``forward`` eagerly and register the op on the active tape.

    ``forward(*arrays)`` returns an array or a tuple of arrays.
    ``backward(grads, outs, *arrays)`` returns one gradient (or None) per input;
    ``grads`` and ``outs`` are tuples for multi-output ops and bare arrays
    otherwise.
    """
    inputs = tuple(_lift(x) for x in inputs)
    res = forward(*(t.data for t in inputs))
    multi = isinstance(res, tuple)
    raw = res if multi else (res,)
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    outs = tuple(Tensor(r, requires_grad=track) for r in raw)
    if track:
        for t in outs:
            t.tape = tape
        for t in inputs:
            if t.requires_grad and t.tape is None:
                t.tape = tape
        tape.ops.append(_Op(kind, inputs, outs, forward, backward, multi))
    return outs if multi else outs[0]


def backward(tape: Tape, loss: Tensor, params: Iterable[Tensor] | None = None
             ) -> dict[str, np.ndarray]:
    """Gradients of a scalar ``loss`` with respect to parameter tensors.

    Returns a map from parameter name to gradient. When ``params`` is given,
    every listed parameter appears in the result (zeros if unreachable).
    """
    if loss.data.size != 1:
        raise ShapeError("backward", [loss.shape], "loss must be scalar")
    grads: dict[int, np.ndarray] = {loss.uid: np.ones_like(loss.data)}
    for op in reversed(tape.ops):
        gs = [grads.pop(o.uid, None) for o in op.outputs]
        if all(g is None for g in gs):
            continue
        gs = [np.zeros_like(o.data) if g is None else g for o, g in zip(op.outputs, gs)]
        outs = tuple(o.data for o in op.outputs)
        if op.multi:
            in_grads = op.backward(tuple(gs), outs, *(t.data for t in op.inputs))
        else:
            in_grads = op.backward(gs[0], outs[0], *(t.data for t in op.inputs))
        for t, g in zip(op.inputs, in_grads):
            if g is None or not t.requires_grad:
                continue
            g = np.asarray(g, dtype=np.float64)
            if g.shape != t.shape:
                raise ShapeError(f"backward[{op.kind}]", [g.shape, t.shape])
            if t.uid in grads:
                grads[t.uid] = grads[t.uid] + g
            else:
                grads[t.uid] = g
    plist = list(params) if params is not None else tape.parameters()
    result: dict[str, np.ndarray] = {}
    for p in plist:
        key = p.name if p.name is not None else str(p.uid)
        if key in result:
            raise GradientError(f"duplicate parameter name {key!r}")
        g = grads.get(p.uid)
        result[key] = np.zeros_like(p.data) if g is None else g
    return result


# --- helpers ---------------------------------------------------------------

def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast(op: str, *ts: Tensor) -> None:
    try:
        np.broadcast_shapes(*(t.shape for t in ts))
    except ValueError:
        raise ShapeError(op, [t.shape for t in ts]) from None


# --- elementwise -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _broadcast("add", a, b)
    return record("add", [a, b], np.add,
                  lambda g, o, x, y: (_unbroadcast(g, x.shape), _unbroadcast(g, y.shape)))


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _broadcast("sub", a, b)
    return record("sub", [a, b], np.subtract,
                  lambda g, o, x, y: (_unbroadcast(g, x.shape), _unbroadcast(-g, y.shape)))


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _broadcast("mul", a, b)
    return record("mul", [a, b], np.multiply,
                  lambda g, o, x, y: (_unbroadcast(g * y, x.shape),
                                      _unbroadcast(g * x, y.shape)))


def div(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _broadcast("div", a, b)
    return record("div", [a, b], np.divide,
                  lambda g, o, x, y: (_unbroadcast(g / y, x.shape),
                                      _unbroadcast(-g * x / (y * y), y.shape)))


def scale(a, c: float) -> Tensor:
    c = float(c)
    return record("scale", [a], lambda x: c * x, lambda g, o, x: (c * g,))


def square(a) -> Tensor:
    return record("square", [a], np.square, lambda g, o, x: (2.0 * x * g,))


def sqrt(a) -> Tensor:
    def bwd(g, o, x):
        safe = np.where(o > 0, o, 1.0)
        return (np.where(o > 0, 0.5 * g / safe, 0.0),)
    return record("sqrt", [a], np.sqrt, bwd)


def tanh(a) -> Tensor:
    return record("tanh", [a], np.tanh, lambda g, o, x: (g * (1.0 - o * o),))


def relu(a) -> Tensor:
    return record("relu", [a], lambda x: np.maximum(x, 0.0),
                  lambda g, o, x: (g * (x > 0),))


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a) -> Tensor:
    def fwd(x):
        return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))

    def bwd(g, o, x):
        cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        return (g * (cdf + x * pdf),)
    return record("gelu", [a], fwd, bwd)


def identity(a) -> Tensor:
    return _lift(a)


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "gelu": gelu,
    "relu": relu,
    "tanh": tanh,
    "identity": identity,
}


# --- complex pairs ----------------------------------------------------------

def cmul(ar, ai, br, bi) -> tuple[Tensor, Tensor]:
    """Elementwise complex product of (ar + i·ai) and (br + i·bi)."""
    ar, ai, br, bi = (_lift(t) for t in (ar, ai, br, bi))
    _broadcast("cmul", ar, ai, br, bi)

    def fwd(xr, xi, yr, yi):
        return xr * yr - xi * yi, xr * yi + xi * yr

    def bwd(g, o, xr, xi, yr, yi):
        gr, gi = g
        # cotangent of a product is conj(other) times cotangent
        return (_unbroadcast(gr * yr + gi * yi, xr.shape),
                _unbroadcast(-gr * yi + gi * yr, xi.shape),
                _unbroadcast(gr * xr + gi * xi, yr.shape),
                _unbroadcast(-gr * xi + gi * xr, yi.shape))
    return record("cmul", [ar, ai, br, bi], fwd, bwd)


# --- linear algebra and structure --------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeError("matmul", [a.shape, b.shape], "scalar operand")
    ka = a.shape[-1]
    kb = b.shape[-2] if b.ndim >= 2 else b.shape[0]
    if ka != kb:
        raise ShapeError("matmul", [a.shape, b.shape])
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", [a.shape, b.shape]) from None

    def bwd(g, o, x, y):
        x2 = x[None, :] if x.ndim == 1 else x
        y2 = y[:, None] if y.ndim == 1 else y
        g2 = g
        if x.ndim == 1:
            g2 = g2[..., None, :] if y.ndim > 1 else g2[None]
        if y.ndim == 1:
            g2 = g2[..., None]
        gx = g2 @ np.swapaxes(y2, -1, -2)
        gy = np.swapaxes(x2, -1, -2) @ g2
        gx = _unbroadcast(gx, x2.shape).reshape(x.shape)
        gy = _unbroadcast(gy, y2.shape).reshape(y.shape)
        return gx, gy
    return record("matmul", [a, b], np.matmul, bwd)


def reshape(a, shape) -> Tensor:
    a = _lift(a)
    shape = tuple(shape)
    try:
        np.empty(a.shape).reshape(shape)
    except ValueError:
        raise ShapeError("reshape", [a.shape, shape]) from None
    return record("reshape", [a], lambda x: x.reshape(shape),
                  lambda g, o, x: (g.reshape(x.shape),))


def transpose(a, axes=None) -> Tensor:
    a = _lift(a)
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError("transpose", [a.shape], f"bad axes {axes}")
    inv = tuple(np.argsort(axes))
    return record("transpose", [a], lambda x: np.transpose(x, axes),
                  lambda g, o, x: (np.transpose(g, inv),))


def getitem(a, index) -> Tensor:
    a = _lift(a)
    try:
        a.data[index]
    except IndexError as exc:
        raise ShapeError("slice", [a.shape], str(exc)) from None

    basic = _is_basic_index(index)

    def bwd(g, o, x):
        full = np.zeros_like(x)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)
    return record("slice", [a], lambda x: x[index], bwd)


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, np.integer)) or i is Ellipsis or i is None
               for i in items)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat", [], "no operands")
    nd = tensors[0].ndim
    ax = axis % nd
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != nd or any(t.shape[i] != ref[i] for i in range(nd) if i != ax):
            raise ShapeError(f"concat-axis{axis}", [t.shape for t in tensors])
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def fwd(*xs):
        return np.concatenate(xs, axis=ax)

    def bwd(g, o, *xs):
        return tuple(np.split(g, bounds, axis=ax))
    return record(f"concat-axis{axis}", tensors, fwd, bwd)


def roll(a, shift: int, axis: int) -> Tensor:
    return record("roll", [a], lambda x: np.roll(x, shift, axis=axis),
                  lambda g, o, x: (np.roll(g, -shift, axis=axis),))


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = _lift(a)

    def bwd(g, o, x):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)
    return record("reduce-sum", [a], lambda x: np.sum(x, axis=axis, keepdims=keepdims), bwd)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    n = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)

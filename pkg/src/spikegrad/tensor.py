"""Dense tensors with reverse-mode autodiff on a define-by-run tape.

Values are numpy arrays (float64 by default, float32 optional). Every
operation validates shapes, checks its output for NaN/Inf and, when any
input participates in differentiation, records the analytic backward rule
needed to push cotangents to its inputs. `backward` walks the recorded
graph once in reverse topological order and returns a gradient map without
mutating any tensor, so repeated calls over the same graph give identical
results.

Broadcasting is deliberately restricted: elementwise ops accept equal
shapes or a size-1 operand, nothing else. Structured expansion goes
through explicit ops (`repeat_rows`, `tile_vector`) whose backward rules
are plain sums, which keeps every rule auditable.
"""

from __future__ import annotations

import contextlib

import numpy as np

__all__ = [
    "Tensor",
    "TensorError",
    "ShapeError",
    "NonFiniteError",
    "set_default_dtype",
    "default_dtype",
    "no_grad",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "stack",
    "index_axis",
    "slice_axis",
    "exp",
    "log",
    "sigmoid",
    "tanh",
    "tensor_sum",
    "tensor_mean",
    "softmax",
    "clip_min",
    "passthrough_step",
    "blocked_step",
    "repeat_rows",
    "tile_vector",
    "backward",
]


class TensorError(Exception):
    """Base error for tensor and tape failures."""


class ShapeError(TensorError):
    """Operands have incompatible shapes for the requested op."""


class NonFiniteError(TensorError):
    """An operation produced, or was handed, NaN or Inf."""


_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))
_DEFAULT_DTYPE = np.dtype(np.float64)
_GRAD_ENABLED = True


def set_default_dtype(dtype) -> None:
    """Select float64 (the default) or float32 for newly created tensors."""
    dt = np.dtype(dtype)
    if dt not in _FLOAT_DTYPES:
        raise ValueError("default dtype must be float32 or float64")
    global _DEFAULT_DTYPE
    _DEFAULT_DTYPE = dt


def default_dtype() -> np.dtype:
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (used for evaluation passes)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    """A dense n-dimensional float array, optionally tracked on the tape.

    Tensors are treated as immutable values; ops return new tensors and
    record how to route cotangents back to their inputs. Leaf tensors
    created with ``requires_grad=True`` are the trainable parameters.
    """

    __slots__ = ("data", "requires_grad", "_parents", "_grad_fn", "_op")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, np.ndarray) and data.dtype in _FLOAT_DTYPES:
            arr = data
        else:
            arr = np.asarray(data, dtype=_DEFAULT_DTYPE)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("tensor created from non-finite values")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(())[()])

    def to_numpy(self) -> np.ndarray:
        return np.array(self.data, copy=True)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

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

    def __neg__(self):
        return neg(self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is supported by plain scalars only")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None):
        return tensor_sum(self, axis)

    def mean(self, axis=None):
        return tensor_mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)


def _make(data, parents, grad_fn, op: str) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"op '{op}' produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = data
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._grad_fn = grad_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._grad_fn = None
    out._op = op
    return out


def _coerce(op: str, a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        if isinstance(b, Tensor):
            return a, b
        return a, Tensor(np.asarray(b, dtype=a.dtype))
    if isinstance(b, Tensor):
        return Tensor(np.asarray(a, dtype=b.dtype)), b
    raise TypeError(f"{op}: expected at least one Tensor operand")


def _check_elementwise(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape == b.shape or a.size == 1 or b.size == 1:
        return
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are neither equal nor scalar-broadcastable")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    # only a size-1 operand can mismatch after the elementwise check
    return np.asarray(np.sum(g)).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _coerce("add", a, b)
    _check_elementwise("add", a, b)
    out = a.data + b.data

    def grad_fn(g, _a=a, _b=b):
        return _reduce_to(g, _a.shape), _reduce_to(g, _b.shape)

    return _make(out, (a, b), grad_fn, "add")


def sub(a, b) -> Tensor:
    a, b = _coerce("sub", a, b)
    _check_elementwise("sub", a, b)
    out = a.data - b.data

    def grad_fn(g, _a=a, _b=b):
        return _reduce_to(g, _a.shape), _reduce_to(-g, _b.shape)

    return _make(out, (a, b), grad_fn, "sub")


def mul(a, b) -> Tensor:
    a, b = _coerce("mul", a, b)
    _check_elementwise("mul", a, b)
    out = a.data * b.data

    def grad_fn(g, _a=a, _b=b):
        return _reduce_to(g * _b.data, _a.shape), _reduce_to(g * _a.data, _b.shape)

    return _make(out, (a, b), grad_fn, "mul")


def neg(a: Tensor) -> Tensor:
    def grad_fn(g):
        return (-g,)

    return _make(-a.data, (a,), grad_fn, "neg")


def matmul(a, b) -> Tensor:
    a, b = _coerce("matmul", a, b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: expected 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    out = a.data @ b.data

    def grad_fn(g, _a=a, _b=b):
        return g @ _b.data.T, _a.data.T @ g

    return _make(out, (a, b), grad_fn, "matmul")


def transpose(a: Tensor, axes=None) -> Tensor:
    out = np.transpose(a.data, axes)
    inverse = None if axes is None else tuple(np.argsort(axes))

    def grad_fn(g, _inv=inverse):
        return (np.transpose(g, _inv),)

    return _make(out, (a,), grad_fn, "transpose")


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view shape {a.shape} as {shape}") from None

    def grad_fn(g, _shape=a.shape):
        return (g.reshape(_shape),)

    return _make(out, (a,), grad_fn, "reshape")


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    if not ts:
        raise ValueError("concat: empty sequence")
    first = ts[0]
    for t in ts[1:]:
        if t.ndim != first.ndim:
            raise ShapeError(f"concat: rank mismatch, {first.shape} vs {t.shape}")
        for d in range(first.ndim):
            if d != axis % first.ndim and t.shape[d] != first.shape[d]:
                raise ShapeError(f"concat: off-axis shape mismatch, {first.shape} vs {t.shape}")
    out = np.concatenate([t.data for t in ts], axis=axis)
    splits = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def grad_fn(g, _splits=splits, _axis=axis):
        return tuple(np.split(g, _splits, axis=_axis))

    return _make(out, tuple(ts), grad_fn, "concat")


def stack(tensors, axis: int = 0) -> Tensor:
    ts = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    if not ts:
        raise ValueError("stack: empty sequence")
    shape = ts[0].shape
    for t in ts[1:]:
        if t.shape != shape:
            raise ShapeError(f"stack: all shapes must match, {shape} vs {t.shape}")
    out = np.stack([t.data for t in ts], axis=axis)

    def grad_fn(g, _axis=axis, _n=len(ts)):
        return tuple(np.take(g, i, axis=_axis) for i in range(_n))

    return _make(out, tuple(ts), grad_fn, "stack")


def index_axis(a: Tensor, axis: int, index: int) -> Tensor:
    """Select one index along an axis, dropping that axis."""
    if not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"index_axis: axis {axis} invalid for shape {a.shape}")
    axis %= a.ndim
    if not 0 <= index < a.shape[axis]:
        raise ShapeError(f"index_axis: index {index} out of range for axis {axis} of shape {a.shape}")
    out = np.take(a.data, index, axis=axis)
    selector = tuple(index if d == axis else slice(None) for d in range(a.ndim))

    def grad_fn(g, _shape=a.shape, _sel=selector, _dt=a.dtype):
        z = np.zeros(_shape, dtype=_dt)
        z[_sel] = g
        return (z,)

    return _make(out, (a,), grad_fn, "index_axis")


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Take a contiguous range along an axis, keeping the axis."""
    if not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"slice_axis: axis {axis} invalid for shape {a.shape}")
    axis %= a.ndim
    if not (0 <= start < stop <= a.shape[axis]):
        raise ShapeError(f"slice_axis: range [{start}, {stop}) invalid for axis {axis} of shape {a.shape}")
    selector = tuple(slice(start, stop) if d == axis else slice(None) for d in range(a.ndim))
    out = a.data[selector].copy()

    def grad_fn(g, _shape=a.shape, _sel=selector, _dt=a.dtype):
        z = np.zeros(_shape, dtype=_dt)
        z[_sel] = g
        return (z,)

    return _make(out, (a,), grad_fn, "slice_axis")


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)

    def grad_fn(g, _y=out):
        return (g * _y,)

    return _make(out, (a,), grad_fn, "exp")


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)

    def grad_fn(g, _x=a.data):
        return (g / _x,)

    return _make(out, (a,), grad_fn, "log")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def grad_fn(g, _y=out):
        return (g * _y * (1.0 - _y),)

    return _make(out, (a,), grad_fn, "sigmoid")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def grad_fn(g, _y=out):
        return (g * (1.0 - _y * _y),)

    return _make(out, (a,), grad_fn, "tanh")


def tensor_sum(a: Tensor, axis=None) -> Tensor:
    out = np.sum(a.data, axis=axis)

    def grad_fn(g, _shape=a.shape, _axis=axis):
        if _axis is None:
            return (np.broadcast_to(g, _shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, _axis), _shape).copy(),)

    return _make(out, (a,), grad_fn, "sum")


def tensor_mean(a: Tensor, axis=None) -> Tensor:
    out = np.mean(a.data, axis=axis)
    count = a.size if axis is None else a.shape[axis]

    def grad_fn(g, _shape=a.shape, _axis=axis, _n=count):
        scaled = g / _n
        if _axis is None:
            return (np.broadcast_to(scaled, _shape).copy(),)
        return (np.broadcast_to(np.expand_dims(scaled, _axis), _shape).copy(),)

    return _make(out, (a,), grad_fn, "mean")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def grad_fn(g, _y=out, _axis=axis):
        dot = np.sum(g * _y, axis=_axis, keepdims=True)
        return (_y * (g - dot),)

    return _make(out, (a,), grad_fn, "softmax")


def clip_min(a: Tensor, lo: float) -> Tensor:
    lo = float(lo)
    out = np.maximum(a.data, lo)

    def grad_fn(g, _mask=(a.data >= lo)):
        return (g * _mask,)

    return _make(out, (a,), grad_fn, "clip_min")


def passthrough_step(a) -> Tensor:
    """Heaviside step (1.0 where x > 0) whose backward passes the cotangent
    through unchanged (straight-through rule).

    The forward is identical to `blocked_step`; only the recorded backward
    rule differs, which is what lets errors cross a spiking nonlinearity
    during reverse-mode differentiation.
    """
    a = a if isinstance(a, Tensor) else Tensor(a)
    out = (a.data > 0).astype(a.dtype)

    def grad_fn(g):
        return (g,)

    return _make(out, (a,), grad_fn, "passthrough_step")


def blocked_step(a) -> Tensor:
    """Heaviside step (1.0 where x > 0) whose backward returns zeros.

    Gradients are stopped here exactly; used for the membrane reset gate
    and for the no-surrogate control mode.
    """
    a = a if isinstance(a, Tensor) else Tensor(a)
    out = (a.data > 0).astype(a.dtype)

    def grad_fn(g):
        return (np.zeros_like(g),)

    return _make(out, (a,), grad_fn, "blocked_step")


def repeat_rows(v: Tensor, n: int) -> Tensor:
    """Stack a vector into n identical rows; backward sums over the rows."""
    if v.ndim != 1:
        raise ShapeError(f"repeat_rows: expected a vector, got shape {v.shape}")
    if n < 1:
        raise ValueError("repeat_rows: n must be >= 1")
    out = np.tile(v.data, (n, 1))

    def grad_fn(g):
        return (g.sum(axis=0),)

    return _make(out, (v,), grad_fn, "repeat_rows")


def tile_vector(v: Tensor, reps: int) -> Tensor:
    """Concatenate reps copies of a vector; backward folds and sums the copies."""
    if v.ndim != 1:
        raise ShapeError(f"tile_vector: expected a vector, got shape {v.shape}")
    if reps < 1:
        raise ValueError("tile_vector: reps must be >= 1")
    out = np.tile(v.data, reps)

    def grad_fn(g, _reps=reps, _k=v.shape[0]):
        return (g.reshape(_reps, _k).sum(axis=0),)

    return _make(out, (v,), grad_fn, "tile_vector")


def backward(loss: Tensor) -> dict[Tensor, Tensor]:
    """Reverse-mode sweep from a scalar loss.

    Returns the map node -> dLoss/dNode for every node reachable on the
    tape, each wrapped as a fresh Tensor. The sweep visits each node once
    in reverse topological order, sums cotangents over fan-out, and leaves
    the graph untouched, so calling it twice yields identical maps.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise TensorError("loss is not connected to any tensor that requires grad")

    order: list[Tensor] = []
    seen: set[int] = set()
    work: list[tuple[Tensor, bool]] = [(loss, False)]
    while work:
        node, ready = work.pop()
        if ready:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        work.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                work.append((parent, False))

    grads: dict[int, tuple[Tensor, np.ndarray]] = {id(loss): (loss, np.ones_like(loss.data))}
    for node in reversed(order):
        entry = grads.get(id(node))
        if entry is None or node._grad_fn is None:
            continue
        g = entry[1]
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            prev = grads.get(id(parent))
            grads[id(parent)] = (parent, pg if prev is None else prev[1] + pg)

    return {node: Tensor(g) for node, g in grads.values()}

"""Dense tensors with reverse-mode automatic differentiation.

The forward pass appends `TapeNode`s to a module-level tape in topological
order; `backward` walks the tape once in reverse. Each node carries an op
identifier, its input tensors, the saved forward context, and a named
backward rule (a plain function, not a closure), so the graph structure is
explicit and the tape can be reset per training step to bound memory.

A tape is confined to one thread at a time. Parallelism lives inside the
kernels, never across the tape.

Training runs in float32; `grad_check` requires float64 inputs so the
finite-difference oracle stays trustworthy.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import NumericalCheckError, ShapeError

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_tape: list["TapeNode"] = []
_recording = True
_validate = True


def reset_tape() -> None:
    """Drop all recorded nodes (and the activations they keep alive)."""
    _tape.clear()


def tape_size() -> int:
    return len(_tape)


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward values unchanged)."""
    global _recording
    prev = _recording
    _recording = False
    try:
        yield
    finally:
        _recording = prev


@contextlib.contextmanager
def validation(enabled: bool):
    """Toggle the per-op NaN/Inf output scan inside the block."""
    global _validate
    prev = _validate
    _validate = enabled
    try:
        yield
    finally:
        _validate = prev


def set_validation(enabled: bool) -> None:
    global _validate
    _validate = bool(enabled)


class Tensor:
    """N-dimensional array node. Leaves with requires_grad own a `.grad`
    accumulator; op outputs carry the tape node that produced them."""

    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.node: TapeNode | None = None

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
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # arithmetic sugar; scalars and arrays become constant tensors
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other, self.dtype))

    def __rtruediv__(self, other):
        return div(_as_tensor(other, self.dtype), self)

    def __neg__(self):
        return neg(self)


@dataclass
class TapeNode:
    op: str
    inputs: tuple[Tensor, ...]
    out: Tensor
    ctx: tuple
    rule: Callable[["TapeNode", np.ndarray], tuple]


def _as_tensor(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _record(op: str, inputs: tuple[Tensor, ...], out_data: np.ndarray, ctx: tuple,
            rule) -> Tensor:
    if _validate and not np.isfinite(out_data).all():
        raise NumericalCheckError(f"non-finite values produced by op '{op}'")
    requires = _recording and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=requires)
    if requires:
        node = TapeNode(op, inputs, out, ctx, rule)
        out.node = node
        _tape.append(node)
    return out


def backward(root: Tensor) -> None:
    """Populate d(root)/d(leaf) on every requires_grad leaf reachable from
    `root`. Repeated calls accumulate additively into leaf grads."""
    if root.size != 1:
        raise ShapeError(f"backward requires a scalar root, got shape {root.shape}")
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    if root.node is None:
        if root.requires_grad:
            if root.grad is None:
                root.grad = np.zeros_like(root.data)
            root.grad += grads[id(root)]
        return
    for node in reversed(_tape):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for inp, ig in zip(node.inputs, node.rule(node, g)):
            if ig is None or not inp.requires_grad:
                continue
            if inp.node is None:
                if inp.grad is None:
                    inp.grad = np.zeros_like(inp.data)
                inp.grad += ig
            elif id(inp) in grads:
                grads[id(inp)] = grads[id(inp)] + ig
            else:
                grads[id(inp)] = ig


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `g` down to `shape`, inverting numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------- elementwise

def _add_rule(node, g):
    a, b = node.inputs
    return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _record("add", (a, b), a.data + b.data, (), _add_rule)


def _sub_rule(node, g):
    a, b = node.inputs
    return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _record("sub", (a, b), a.data - b.data, (), _sub_rule)


def _mul_rule(node, g):
    a, b = node.inputs
    return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _record("mul", (a, b), a.data * b.data, (), _mul_rule)


def _div_rule(node, g):
    a, b = node.inputs
    return (
        _unbroadcast(g / b.data, a.shape),
        _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    return _record("div", (a, b), a.data / b.data, (), _div_rule)


def _neg_rule(node, g):
    return (-g,)


def neg(a: Tensor) -> Tensor:
    return _record("neg", (a,), -a.data, (), _neg_rule)


def _tanh_rule(node, g):
    (y,) = node.ctx
    return (g * (1.0 - y * y),)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _record("tanh", (a,), y, (y,), _tanh_rule)


def _sigmoid_rule(node, g):
    (y,) = node.ctx
    return (g * y * (1.0 - y),)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return _record("sigmoid", (a,), y, (y,), _sigmoid_rule)


def _relu_rule(node, g):
    (mask,) = node.ctx
    return (g * mask,)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _record("relu", (a,), a.data * mask, (mask,), _relu_rule)


def _dropout_rule(node, g):
    (scaled_mask,) = node.ctx
    return (g * scaled_mask,)


def dropout(a: Tensor, p: float, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout. `rng=None` means eval mode (identity); p=0 is also
    an identity and consumes no random numbers."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if rng is None or p == 0.0:
        return _record("dropout", (a,), a.data.copy(), (np.float64(1.0),), _dropout_rule)
    keep = rng.random(a.shape) >= p
    scaled_mask = keep.astype(a.dtype) / a.dtype.type(1.0 - p)
    return _record("dropout", (a,), a.data * scaled_mask, (scaled_mask,), _dropout_rule)


# ------------------------------------------------------------ shape plumbing

def _reshape_rule(node, g):
    (shape,) = node.ctx
    return (g.reshape(shape),)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return _record("reshape", (a,), a.data.reshape(tuple(shape)), (a.shape,), _reshape_rule)


def _slice_rule(node, g):
    shape, slicer = node.ctx
    dx = np.zeros(shape, dtype=g.dtype)
    dx[slicer] = g
    return (dx,)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    slicer = tuple(slice(start, stop) if d == axis else slice(None) for d in range(a.ndim))
    return _record("slice", (a,), a.data[slicer].copy(), (a.shape, slicer), _slice_rule)


def _concat_rule(node, g):
    axis, offsets = node.ctx
    return tuple(
        np.ascontiguousarray(np.take(g, np.arange(lo, hi), axis=axis))
        for lo, hi in offsets
    )


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    ts = list(tensors)
    if not ts:
        raise ShapeError("concat needs at least one tensor")
    out = np.concatenate([t.data for t in ts], axis=axis)
    offsets = []
    pos = 0
    for t in ts:
        offsets.append((pos, pos + t.shape[axis]))
        pos += t.shape[axis]
    return _record("concat", tuple(ts), out, (axis, tuple(offsets)), _concat_rule)


def _mean_axis_rule(node, g):
    axis, shape = node.ctx
    n = shape[axis]
    return (np.broadcast_to(np.expand_dims(g, axis), shape) / n,)


def mean_axis(a: Tensor, axis: int) -> Tensor:
    # accumulate in float64 so the mean is permutation-stable in float32
    out = a.data.mean(axis=axis, dtype=np.float64).astype(a.dtype)
    return _record("mean", (a,), out, (axis, a.shape), _mean_axis_rule)


def _mean_all_rule(node, g):
    shape, n = node.ctx
    return (np.full(shape, g / n, dtype=g.dtype),)


def mean_all(a: Tensor) -> Tensor:
    out = np.asarray(a.data.mean(dtype=np.float64), dtype=a.dtype)
    return _record("mean", (a,), out, (a.shape, a.size), _mean_all_rule)


# ------------------------------------------------------------- linear algebra

def _matmul_rule(node, g):
    a, b = node.inputs
    return g @ b.data.T, a.data.T @ g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} x {b.shape} are incompatible")
    return _record("matmul", (a, b), a.data @ b.data, (), _matmul_rule)


def _linear_rule(node, g):
    x, w, _ = node.inputs
    return g @ w.data.T, x.data.T @ g, g.sum(axis=0)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y[n,o] = sum_i x[n,i] w[i,o] + b[o]."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear shapes {x.shape} x {w.shape} are incompatible")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"linear bias shape {b.shape} != ({w.shape[1]},)")
    return _record("linear", (x, w, b), x.data @ w.data + b.data, (), _linear_rule)


def _conv2d_rule(node, g):
    x, k, _ = node.inputs
    stride, pad = node.ctx
    kh, kw = k.shape[2], k.shape[3]
    dx = kernels.conv2d_input_grad(g, k.data, stride, pad, x.shape[2], x.shape[3])
    dk = kernels.conv2d_kernel_grad(g, x.data, stride, pad, kh, kw)
    return dx, dk, g.sum(axis=(0, 2, 3))


def conv2d(x: Tensor, k: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation over a zero-padded input, plus per-filter bias."""
    if x.ndim != 4 or k.ndim != 4:
        raise ShapeError("conv2d expects x[B,C,H,W] and k[F,C,Kh,Kw]")
    if x.shape[1] != k.shape[1]:
        raise ShapeError(f"conv2d channels {x.shape[1]} != kernel channels {k.shape[1]}")
    if b.shape != (k.shape[0],):
        raise ShapeError(f"conv2d bias shape {b.shape} != ({k.shape[0]},)")
    h, w = x.shape[2], x.shape[3]
    kh, kw = k.shape[2], k.shape[3]
    if (h + 2 * pad - kh) % stride or (w + 2 * pad - kw) % stride:
        raise ShapeError(
            f"conv2d output dims not integral for input {h}x{w}, "
            f"kernel {kh}x{kw}, stride {stride}, pad {pad}"
        )
    if h + 2 * pad < kh or w + 2 * pad < kw:
        raise ShapeError("conv2d kernel larger than padded input")
    y = kernels.conv2d_forward(x.data, k.data, stride, pad)
    y = y + b.data[None, :, None, None]
    return _record("conv2d", (x, k, b), y, (stride, pad), _conv2d_rule)


def _maxpool_rule(node, g):
    arg, h, w = node.ctx
    return (kernels.maxpool2d_backward(np.ascontiguousarray(g), arg, h, w),)


def maxpool2d(x: Tensor) -> Tensor:
    """2x2/stride-2 max pooling; a trailing odd row/column is dropped.
    Gradient routes to the first maximum in row-major window order."""
    if x.ndim != 4:
        raise ShapeError("maxpool2d expects x[B,C,H,W]")
    h, w = x.shape[2], x.shape[3]
    if h // 2 == 0 or w // 2 == 0:
        raise ShapeError(f"maxpool2d spatial dims too small: {h}x{w}")
    y, arg = kernels.maxpool2d_forward(x.data)
    return _record("maxpool2d", (x,), y, (arg, h, w), _maxpool_rule)


# ---------------------------------------------------------------- grad check

@dataclass
class GradCheckResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def grad_check(fn, inputs: Sequence[Tensor], tolerance: float = 1e-4,
               h: float = 1e-5, name: str = "fn") -> GradCheckResult:
    """Compare analytic gradients of the scalar `fn(*inputs)` against central
    differences, elementwise. Inputs must be float64 leaves."""
    inputs = list(inputs)
    for t in inputs:
        if t.dtype != np.float64:
            raise NumericalCheckError("grad_check requires float64 inputs")
        if not t.requires_grad:
            raise NumericalCheckError("grad_check inputs must have requires_grad")
        t.zero_grad()
    mark = tape_size()
    try:
        out = fn(*inputs)
        if out.size != 1:
            raise ShapeError("grad_check function must return a scalar")
        out.backward()
        analytic = [
            t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
            for t in inputs
        ]
        max_rel = 0.0
        for t, a in zip(inputs, analytic):
            flat = t.data.reshape(-1)
            a_flat = a.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                with no_grad():
                    f_hi = float(fn(*inputs).data)
                flat[i] = orig - h
                with no_grad():
                    f_lo = float(fn(*inputs).data)
                flat[i] = orig
                numeric = (f_hi - f_lo) / (2.0 * h)
                rel = abs(a_flat[i] - numeric) / max(abs(a_flat[i]), abs(numeric), 1e-8)
                if rel > max_rel:
                    max_rel = rel
    finally:
        del _tape[mark:]
    return GradCheckResult(name, max_rel, tolerance)

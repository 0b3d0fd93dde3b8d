"""Differentiable primitives.

Each op computes its value with numpy/scipy and records a vector-Jacobian
closure on the active graph. Operands must have equal shapes, except that a
0-d tensor (or Python number) combines with anything.
"""

from __future__ import annotations

from typing import Any, List, Literal, Sequence, Tuple

import numpy as np

from scipy import special

from kinforest.autodiff.tensor import Tensor, current_graph
from kinforest.errors import DimensionError, PreconditionError


DIV_GUARD = 1e-12

ElementwiseKind = Literal["add", "sub", "mul", "div"]
ActivationKind = Literal["sigmoid", "relu"]


def tensor(value: Any, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(value, requires_grad=requires_grad, name=name)


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _record(op: str, inputs: Sequence[Tensor], value: np.ndarray, vjp) -> Tensor:
    graph = current_graph()
    if graph is None:
        return Tensor(value)
    return graph.record(op, inputs, value, vjp)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to a 0-d operand's shape."""
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum()).reshape(shape)


def _check_elementwise(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise DimensionError(op, a.shape, b.shape)


# ===========================================================================================
# Linear algebra
# ===========================================================================================

def matmul(a: Any, b: Any) -> Tensor:
    """Matrix product of 1-D/2-D operands (vectors are promoted as in numpy)."""
    a, b = as_tensor(a), as_tensor(b)
    if not (1 <= a.ndim <= 2 and 1 <= b.ndim <= 2) or a.shape[-1] != b.shape[0]:
        raise DimensionError("matmul", a.shape, b.shape)

    av, bv = a.value, b.value
    a2 = av if av.ndim == 2 else av[None, :]
    b2 = bv if bv.ndim == 2 else bv[:, None]
    value = av @ bv

    def vjp(g: np.ndarray):
        g2 = g.reshape(a2.shape[0], b2.shape[1])
        return (g2 @ b2.T).reshape(av.shape), (a2.T @ g2).reshape(bv.shape)

    return _record("matmul", (a, b), value, vjp)


def linear(x: Any, weight: Any, bias: Any | None = None) -> Tensor:
    """`x @ weightᵀ + bias` over the trailing axis.

    `x` is (N, k) or (G, N, k). `weight` is (o, k), applied to every leading
    slice, or (G, o, k) with one map per leading slice. `bias` is (o,) or (G, o).
    """
    x, weight = as_tensor(x), as_tensor(weight)
    per_slice = weight.ndim == 3
    if (
        x.ndim not in (2, 3)
        or weight.ndim not in (2, 3)
        or x.shape[-1] != weight.shape[-1]
        or (per_slice and (x.ndim != 3 or x.shape[0] != weight.shape[0]))
    ):
        raise DimensionError("linear", x.shape, weight.shape)

    xv, wv = x.value, weight.value
    value = np.matmul(xv, np.swapaxes(wv, -1, -2))

    inputs: List[Tensor] = [x, weight]
    b: Tensor | None = None
    if bias is not None:
        b = as_tensor(bias)
        expected = (weight.shape[0], weight.shape[1]) if per_slice else (weight.shape[0],)
        if b.shape != expected:
            raise DimensionError("linear.bias", b.shape, expected)
        value = value + (b.value[:, None, :] if per_slice else b.value)
        inputs.append(b)

    def vjp(g: np.ndarray):
        gx = np.matmul(g, wv)
        if per_slice:
            gw = np.matmul(np.swapaxes(g, -1, -2), xv)
            gb = g.sum(axis=1)
        else:
            gw = g.reshape(-1, g.shape[-1]).T @ xv.reshape(-1, xv.shape[-1])
            gb = g.reshape(-1, g.shape[-1]).sum(axis=0)
        return (gx, gw, gb) if b is not None else (gx, gw)

    return _record("linear", inputs, value, vjp)


def transpose(a: Any) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise DimensionError("transpose", a.shape)
    return _record("transpose", (a,), a.value.T.copy(), lambda g: (g.T,))


def reshape(a: Any, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    original = a.shape
    try:
        value = a.value.reshape(tuple(shape))
    except ValueError:
        raise DimensionError("reshape", original, tuple(shape)) from None
    return _record("reshape", (a,), value, lambda g: (g.reshape(original),))


# ===========================================================================================
# Elementwise
# ===========================================================================================

def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("add", a, b)
    return _record("add", (a, b), a.value + b.value,
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("sub", a, b)
    return _record("sub", (a, b), a.value - b.value,
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("mul", a, b)
    av, bv = a.value, b.value
    return _record("mul", (a, b), av * bv,
                   lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)))


def guarded(denominator: np.ndarray) -> np.ndarray:
    """sign(d)·(|d| + 1e-12), with sign(0) taken as +1."""
    sign = np.where(denominator < 0, -1.0, 1.0)
    return sign * (np.abs(denominator) + DIV_GUARD)


def div(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("div", a, b)
    av, safe = a.value, guarded(b.value)
    value = av / safe

    def vjp(g: np.ndarray):
        return _unbroadcast(g / safe, a.shape), _unbroadcast(-g * av / (safe * safe), b.shape)

    return _record("div", (a, b), value, vjp)


def elementwise(a: Any, b: Any, kind: ElementwiseKind) -> Tensor:
    dispatch = {"add": add, "sub": sub, "mul": mul, "div": div}
    if kind not in dispatch:
        raise ValueError(f"unknown elementwise kind '{kind}'")
    return dispatch[kind](a, b)


def square(x: Any) -> Tensor:
    x = as_tensor(x)
    xv = x.value
    return _record("square", (x,), xv * xv, lambda g: (2.0 * xv * g,))


def sqrt(x: Any) -> Tensor:
    x = as_tensor(x)
    value = np.sqrt(x.value)
    return _record("sqrt", (x,), value, lambda g: (g / (2.0 * value),))


# ===========================================================================================
# Activations
# ===========================================================================================

def sigmoid(x: Any) -> Tensor:
    x = as_tensor(x)
    s = special.expit(x.value)
    return _record("sigmoid", (x,), s, lambda g: (g * s * (1.0 - s),))


def relu(x: Any) -> Tensor:
    x = as_tensor(x)
    mask = x.value > 0
    return _record("relu", (x,), np.where(mask, x.value, 0.0), lambda g: (g * mask,))


def activation(x: Any, kind: ActivationKind) -> Tensor:
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "relu":
        return relu(x)
    raise ValueError(f"unknown activation '{kind}'")


def softplus(x: Any) -> Tensor:
    """log(1 + exp(x)), finite for any float input."""
    x = as_tensor(x)
    value = -special.log_expit(-x.value)
    s = special.expit(x.value)
    return _record("softplus", (x,), value, lambda g: (g * s,))


def log_softmax(x: Any, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    value = special.log_softmax(x.value, axis=axis)
    probs = np.exp(value)

    def vjp(g: np.ndarray):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return _record("log_softmax", (x,), value, vjp)


# ===========================================================================================
# Structure
# ===========================================================================================

def concat(parts: Sequence[Any], axis: int = 0) -> Tensor:
    tensors = [as_tensor(p) for p in parts]
    if not tensors:
        raise PreconditionError("concat needs at least one part")
    try:
        value = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError("concat", *[t.shape for t in tensors]) from None
    offsets = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    return _record("concat", tensors, value, lambda g: tuple(np.split(g, offsets, axis=axis)))


def stack(parts: Sequence[Any], axis: int = 0) -> Tensor:
    tensors = [as_tensor(p) for p in parts]
    if not tensors:
        raise PreconditionError("stack needs at least one part")
    if len({t.shape for t in tensors}) != 1:
        raise DimensionError("stack", *[t.shape for t in tensors])
    value = np.stack([t.value for t in tensors], axis=axis)

    def vjp(g: np.ndarray):
        return tuple(np.moveaxis(g, axis, 0))

    return _record("stack", tensors, value, vjp)


def _is_basic_key(key: Any) -> bool:
    """Ints and slices only: such a key never selects an element twice."""
    parts = key if isinstance(key, tuple) else (key,)
    return all(
        (isinstance(part, (int, np.integer, slice)) and not isinstance(part, bool)) or part is None or part is Ellipsis
        for part in parts
    )


def index(x: Any, key: Any) -> Tensor:
    """Basic or advanced indexing (`x[key]`); repeated indices accumulate."""
    x = as_tensor(x)
    value = np.array(x.value[key], dtype=np.float64)

    basic = _is_basic_key(key)

    def vjp(g: np.ndarray):
        full = np.zeros_like(x.value)
        if basic:
            full[key] = g
        else:
            np.add.at(full, key, g)
        return (full,)

    return _record("index", (x,), value, vjp)


def gather(x: Any, flat_indices: Any) -> Tensor:
    """Pick entries of `x` by row-major flat position."""
    x = as_tensor(x)
    idx = np.asarray(flat_indices, dtype=np.intp)
    value = x.value.reshape(-1)[idx]

    def vjp(g: np.ndarray):
        full = np.bincount(idx.reshape(-1), weights=np.reshape(g, -1), minlength=x.size)
        return (full.reshape(x.shape),)

    return _record("gather", (x,), value, vjp)


# ===========================================================================================
# Reductions
# ===========================================================================================

def reduce_mean(xs: Sequence[Any]) -> Tensor:
    """Elementwise mean of a list of equally shaped tensors."""
    tensors = [as_tensor(x) for x in xs]
    if not tensors:
        raise PreconditionError("reduce_mean of an empty list")
    if len({t.shape for t in tensors}) != 1:
        raise DimensionError("reduce_mean", *[t.shape for t in tensors])
    n = len(tensors)
    value = np.sum([t.value for t in tensors], axis=0) / n

    return _record("reduce_mean", tensors, value, lambda g: tuple(g / n for _ in range(n)))


def sum(x: Any, axis: int | None = None) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    value = np.asarray(x.value.sum(axis=axis))
    shape = x.shape

    def vjp(g: np.ndarray):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _record("sum", (x,), value, vjp)


def mean(x: Any, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis), 1.0 / count)


def sum_sq(x: Any) -> Tensor:
    x = as_tensor(x)
    xv = x.value
    return _record("sum_sq", (x,), np.asarray(np.sum(xv * xv)), lambda g: (2.0 * xv * g,))


def pairwise_sq_dists(features: Any) -> Tensor:
    """D[i, j] = ‖f_i − f_j‖² for the rows of an (n, d) matrix."""
    f = as_tensor(features)
    if f.ndim != 2:
        raise DimensionError("pairwise_sq_dists", f.shape)
    fv = f.value
    sq = np.einsum("ij,ij->i", fv, fv)
    value = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (fv @ fv.T), 0.0)
    np.fill_diagonal(value, 0.0)

    def vjp(g: np.ndarray):
        s = g + g.T
        return (2.0 * (s.sum(axis=1)[:, None] * fv - s @ fv),)

    return _record("pairwise_sq_dists", (f,), value, vjp)

"""
Differentiable primitives.

Every primitive computes its forward value with numpy and, when gradients are
enabled and one of its inputs requires them, records a backward closure on the
calling thread's tape. Backward closures receive dL/d(output) and return
dL/d(input) for each input, in argument order.
"""

from typing import Optional, Sequence

import numpy as np

from igmc.core.config import settings
from igmc.core.exceptions import NumericalError, raise_argument_error, raise_contract_error, raise_dimension_error
from igmc.diff.tensor import BackwardFn, Tensor, get_tape, is_grad_enabled


def _emit(op: str, inputs: Sequence[Tensor], value: np.ndarray, backward: BackwardFn) -> Tensor:
    if settings.DEBUG_NUMERICS and not np.all(np.isfinite(value)):
        raise NumericalError(f"{op} produced a non-finite value")
    out = Tensor(value, dtype=value.dtype)
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.is_leaf = False
        get_tape().record(op, inputs, out, backward)
    return out


def _check_indices(op: str, indices: np.ndarray, bound: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64).reshape(-1)
    if indices.size and (indices.min() < 0 or indices.max() >= bound):
        raise_contract_error(f"{op}: indices outside [0, {bound})")
    return indices


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise_dimension_error("matmul", a.shape, b.shape)

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _emit("matmul", (a, b), a.data @ b.data, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may also be a row vector broadcast over the rows of a."""
    if a.shape == b.shape:
        def backward(g):
            return g, g

        return _emit("add", (a, b), a.data + b.data, backward)

    row_broadcast = a.ndim == 2 and (b.shape == (a.shape[1],) or b.shape == (1, a.shape[1]))
    if not row_broadcast:
        raise_dimension_error("add", a.shape, b.shape)

    def backward(g):
        return g, g.sum(axis=0).reshape(b.shape)

    return _emit("add", (a, b), a.data + b.data.reshape(1, -1), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    def backward(g):
        return (g * factor,)

    return _emit("scale", (a,), a.data * factor, backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise_contract_error("concat needs at least one tensor")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[k] != tensors[0].shape[k] for k in range(ndim) if k != axis):
            raise_dimension_error("concat", tensors[0].shape, t.shape)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _emit("concat", tensors, np.concatenate([t.data for t in tensors], axis=axis), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape)) != a.size:
        raise_dimension_error("reshape", a.shape, shape)

    def backward(g):
        return (g.reshape(a.shape),)

    return _emit("reshape", (a,), a.data.reshape(shape), backward)


def row_gather(x: Tensor, indices) -> Tensor:
    if x.ndim != 2:
        raise_dimension_error("row_gather", x.shape)
    idx = _check_indices("row_gather", indices, x.shape[0])

    def backward(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, idx, g)
        return (grad,)

    return _emit("row_gather", (x,), x.data[idx], backward)


def row_scatter_add(x: Tensor, indices, num_rows: int, weights: Optional[np.ndarray] = None) -> Tensor:
    """
    Sum rows of x into a num_rows-row result: out[indices[k]] += weights[k] * x[k].

    The weights are constants (no gradient flows into them).
    """
    if x.ndim != 2:
        raise_dimension_error("row_scatter_add", x.shape)
    idx = _check_indices("row_scatter_add", indices, num_rows)
    if idx.size != x.shape[0]:
        raise_dimension_error("row_scatter_add", x.shape, idx.shape)
    w = None
    if weights is not None:
        w = np.asarray(weights, dtype=x.data.dtype).reshape(-1, 1)
        if w.shape[0] != idx.size:
            raise_dimension_error("row_scatter_add", x.shape, w.shape)

    rows = x.data if w is None else x.data * w
    out = np.zeros((num_rows, x.shape[1]), dtype=x.data.dtype)
    np.add.at(out, idx, rows)

    def backward(g):
        picked = g[idx]
        return (picked if w is None else picked * w,)

    return _emit("row_scatter_add", (x,), out, backward)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def backward(g):
        return (g * (1.0 - y * y),)

    return _emit("tanh", (x,), y, backward)


def relu(x: Tensor) -> Tensor:
    positive = x.data > 0

    def backward(g):
        return (g * positive,)

    return _emit("relu", (x,), np.where(positive, x.data, 0.0).astype(x.data.dtype), backward)


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """Inverted dropout: kept entries are scaled by 1/(1-p) at train time, identity at eval time."""
    if not 0.0 <= p < 1.0:
        raise_argument_error("dropout probability", p, "a value in [0, 1)")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise_contract_error("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    keep = keep.astype(x.data.dtype)

    def backward(g):
        return (g * keep,)

    return _emit("dropout", (x,), x.data * keep, backward)


def sum_rows(x: Tensor) -> Tensor:
    """Column-wise sum over rows: (m, n) -> (1, n)."""
    if x.ndim != 2:
        raise_dimension_error("sum_rows", x.shape)

    def backward(g):
        return (np.broadcast_to(g, x.shape).copy(),)

    return _emit("sum_rows", (x,), x.data.sum(axis=0, keepdims=True), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(g):
        return (np.full(x.shape, g.reshape(-1)[0], dtype=x.data.dtype),)

    return _emit("sum_all", (x,), np.asarray(x.data.sum(), dtype=x.data.dtype), backward)


def frobenius_sq(x: Tensor) -> Tensor:
    """Sum of squared entries, as a scalar."""
    def backward(g):
        return (2.0 * x.data * g.reshape(-1)[0],)

    return _emit("frobenius_sq", (x,), np.asarray(np.sum(x.data * x.data), dtype=x.data.dtype), backward)

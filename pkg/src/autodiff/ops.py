"""
Op registry and the elementary differentiable ops.

An op is a function over numpy arrays returning `(output, backward)` or
`(output, backward, aux)`, where `backward(g)` yields one gradient (or None)
per array input. Keyword attributes are non-differentiable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from src.autodiff.tape import Tape, current_tape
from src.autodiff.tensor import Tensor
from src.errors import ShapeError


@dataclass(frozen=True)
class OpDef:
    name: str
    fn: Callable[..., tuple]
    differentiable: bool = True


OPS: dict[str, OpDef] = {}


def register_op(name: str, differentiable: bool = True):
    def deco(fn):
        if name in OPS:
            raise ValueError(f"op '{name}' registered twice")
        OPS[name] = OpDef(name, fn, differentiable)
        return fn
    return deco


def apply_op(name: str, *inputs: Tensor, **attrs):
    """Run a registered op on tensors, recording it on the active tape."""
    try:
        op = OPS[name]
    except KeyError:
        raise ValueError(f"unknown op '{name}'") from None
    result = op.fn(*(t.data for t in inputs), **attrs)
    out, backward_fn = result[0], result[1]
    aux = result[2] if len(result) > 2 else None
    out_t = Tensor(out)
    tape = current_tape()
    if tape is not None and op.differentiable:
        tape.record(name, inputs, out_t, backward_fn)
    return out_t if len(result) == 2 else (out_t, aux)


def forward(
    graph: Callable[..., Any],
    inputs: Mapping[str, Any],
    input_shapes: Optional[Mapping[str, Sequence[Optional[int]]]] = None,
    tape: Optional[Tape] = None,
) -> dict[str, Tensor]:
    """
    Evaluate `graph(**inputs)` after validating named input shapes
    (None in a declared shape matches any size). A Tensor result is returned
    under the key "output".
    """
    tensors = {k: v if isinstance(v, Tensor) else Tensor(v) for k, v in inputs.items()}
    for key, shape in (input_shapes or {}).items():
        if key not in tensors:
            raise ShapeError(f"forward:{key}", tuple(shape), None)
        actual = tensors[key].shape
        if len(actual) != len(shape) or any(s is not None and s != a for s, a in zip(shape, actual)):
            raise ShapeError(f"forward:{key}", tuple(shape), actual)

    if tape is not None:
        with tape:
            result = graph(**tensors)
    else:
        result = graph(**tensors)
    return {"output": result} if isinstance(result, Tensor) else dict(result)


def expect_shape(op: str, arr: np.ndarray, shape: Sequence[Optional[int]]) -> None:
    if arr.ndim != len(shape) or any(s is not None and s != a for s, a in zip(shape, arr.shape)):
        raise ShapeError(op, tuple(shape), arr.shape)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def sigmoid_np(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ── elementary ops ────────────────────────────────────────────────────────────

@register_op("identity")
def _identity(x):
    return x, lambda g: (g,)


@register_op("add")
def _add(a, b):
    try:
        out = a + b
    except ValueError:
        raise ShapeError("add", a.shape, b.shape) from None
    return out, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))


@register_op("sub")
def _sub(a, b):
    try:
        out = a - b
    except ValueError:
        raise ShapeError("sub", a.shape, b.shape) from None
    return out, lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape))


@register_op("mul")
def _mul(a, b):
    try:
        out = a * b
    except ValueError:
        raise ShapeError("mul", a.shape, b.shape) from None
    return out, lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape))


@register_op("scale")
def _scale(x, factor: float):
    return x * factor, lambda g: (g * factor,)


@register_op("sum")
def _sum(x):
    return np.asarray(x.sum()), lambda g: (np.broadcast_to(g, x.shape).copy(),)


@register_op("mean")
def _mean(x):
    n = max(x.size, 1)
    return np.asarray(x.sum() / n), lambda g: (np.full(x.shape, g / n, dtype=x.dtype),)


@register_op("project")
def _project(x, weights: np.ndarray):
    """Scalar sum(x * weights) against a constant array."""
    weights = np.asarray(weights, dtype=x.dtype)
    if weights.shape != x.shape:
        raise ShapeError("project", x.shape, weights.shape)
    return np.asarray((x * weights).sum()), lambda g: (g * weights,)


@register_op("sigmoid")
def _sigmoid(x):
    s = sigmoid_np(x)
    return s, lambda g: (g * s * (1.0 - s),)


@register_op("reshape")
def _reshape(x, shape: tuple[int, ...]):
    try:
        out = x.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", shape, x.shape) from None
    return out, lambda g: (g.reshape(x.shape),)


def sigmoid(x: Tensor) -> Tensor:
    return apply_op("sigmoid", x)


def mean(x: Tensor) -> Tensor:
    return apply_op("mean", x)


def project(x: Tensor, weights: np.ndarray) -> Tensor:
    return apply_op("project", x, weights=weights)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return apply_op("reshape", x, shape=tuple(shape))


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    total = tensors[0]
    for t in tensors[1:]:
        total = total + t
    return total


@register_op("batch_take")
def _batch_take(x, index: np.ndarray):
    """Rows of x along axis 0 (used to drop reads from a batch)."""
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        dx = np.zeros(x.shape, dtype=g.dtype)
        np.add.at(dx, index, g)
        return (dx,)

    return x[index], backward


def batch_take(x: Tensor, index: Sequence[int]) -> Tensor:
    return apply_op("batch_take", x, index=np.asarray(index, dtype=np.int64))

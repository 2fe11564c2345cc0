"""
Immutable dense tensors and trainable parameters.

Tensors wrap a read-only numpy array in the active floating dtype (float32 by
default; `use_dtype(np.float64)` switches it, which the finite-difference
oracles rely on). Every tensor carries a process-unique node id the tape uses
to route gradients.
"""
from __future__ import annotations

import itertools
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any, Iterator

import numpy as np

_DTYPE: ContextVar[type] = ContextVar("dynpool_dtype", default=np.float32)
_NODE_IDS = itertools.count(1)


def default_dtype() -> type:
    return _DTYPE.get()


@contextmanager
def use_dtype(dtype) -> Iterator[None]:
    """Temporarily compute in another float dtype."""
    token = _DTYPE.set(np.dtype(dtype).type)
    try:
        yield
    finally:
        _DTYPE.reset(token)


class Tensor:
    __slots__ = ("_data", "id")

    def __init__(self, data: Any):
        arr = np.array(data, dtype=default_dtype(), copy=True)
        arr.setflags(write=False)
        self._data = arr
        self.id = next(_NODE_IDS)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def dtype(self):
        return self._data.dtype

    def item(self) -> float:
        return float(self._data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self._data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, id={self.id})"

    def __len__(self) -> int:
        return self.shape[0]

    # ── arithmetic sugar, routed through the op registry ─────────────────────
    def __add__(self, other: "Tensor") -> "Tensor":
        from src.autodiff.ops import apply_op
        return apply_op("add", self, _as_tensor(other))

    def __radd__(self, other) -> "Tensor":
        return self.__add__(other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from src.autodiff.ops import apply_op
        return apply_op("sub", self, _as_tensor(other))

    def __mul__(self, other) -> "Tensor":
        from src.autodiff.ops import apply_op
        if isinstance(other, (int, float)):
            return apply_op("scale", self, factor=float(other))
        return apply_op("mul", self, _as_tensor(other))

    def __rmul__(self, other) -> "Tensor":
        return self.__mul__(other)

    def __neg__(self) -> "Tensor":
        from src.autodiff.ops import apply_op
        return apply_op("scale", self, factor=-1.0)

    def sum(self) -> "Tensor":
        from src.autodiff.ops import apply_op
        return apply_op("sum", self)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class Parameter:
    """A named trainable array: `value` is replaced (never mutated) by the optimizer."""

    def __init__(self, name: str, value: Any):
        self.name = name
        self.value = Tensor(value)
        self.grad = np.zeros(self.value.shape, dtype=self.value.dtype)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def use(self) -> Tensor:
        """Return the value tensor, registering this parameter with the active tape."""
        from src.autodiff.tape import current_tape
        tape = current_tape()
        if tape is not None:
            tape.watch(self)
        return self.value

    def assign(self, array: np.ndarray) -> None:
        array = np.asarray(array)
        if array.shape != self.value.shape:
            from src.errors import ShapeError
            raise ShapeError(f"assign:{self.name}", self.value.shape, array.shape)
        self.value = Tensor(array)

    def zero_grad(self) -> None:
        self.grad = np.zeros(self.value.shape, dtype=self.value.dtype)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"

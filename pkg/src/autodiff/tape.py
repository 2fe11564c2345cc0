"""
Define-by-run differentiation tape.

Ops executed inside `with Tape() as tape:` append an entry (op name, input ids,
output id, backward closure). `backward(loss)` replays the entries in reverse,
summing gradients per node, and accumulates into the watched parameters.
Outside any tape, ops run as plain inference.
"""
from __future__ import annotations

import logging
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from src.autodiff.tensor import Parameter, Tensor
from src.errors import NonFiniteError, TapeError

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE: ContextVar[Optional["Tape"]] = ContextVar("dynpool_tape", default=None)


def current_tape() -> Optional["Tape"]:
    return _ACTIVE.get()


@dataclass
class TapeEntry:
    op: str
    inputs: tuple[int, ...]
    output: int
    backward: BackwardFn


@dataclass
class Tape:
    entries: list[TapeEntry] = field(default_factory=list)
    params: dict[int, Parameter] = field(default_factory=dict)
    grads: dict[int, np.ndarray] = field(default_factory=dict)
    consumed: bool = False
    _tokens: list = field(default_factory=list, repr=False)

    def __enter__(self) -> "Tape":
        self._tokens.append(_ACTIVE.set(self))
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.reset(self._tokens.pop())

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward_fn: BackwardFn) -> None:
        if self.consumed:
            raise TapeError("cannot record on a tape that already ran backward")
        self.entries.append(TapeEntry(op, tuple(t.id for t in inputs), output.id, backward_fn))

    def watch(self, param: Parameter) -> None:
        self.params[param.value.id] = param

    def produced(self, node_id: int) -> bool:
        return any(e.output == node_id for e in self.entries)

    def grad(self, tensor: Tensor) -> np.ndarray:
        """Gradient of the last backward's loss w.r.t. any tensor seen on this tape."""
        if not self.consumed:
            raise TapeError("gradients requested before backward")
        g = self.grads.get(tensor.id)
        return np.zeros(tensor.shape, dtype=tensor.dtype) if g is None else g


def backward(loss: Tensor, tape: Optional[Tape] = None) -> dict[str, np.ndarray]:
    """
    Reverse-mode sweep from a scalar `loss`.
    Returns this call's gradient per watched parameter name; the same amounts
    are added onto each `Parameter.grad`.
    """
    tape = tape if tape is not None else current_tape()
    if tape is None or not tape.entries:
        raise TapeError("backward called before any forward was recorded")
    if tape.consumed:
        raise TapeError("backward already ran on this tape")
    if loss.size != 1:
        raise TapeError(f"loss must be scalar, got shape {loss.shape}")
    if not tape.produced(loss.id):
        raise TapeError("loss tensor was not produced on this tape")
    if not np.isfinite(loss.data).all():
        raise NonFiniteError("loss", f"value {loss.item()}")

    grads: dict[int, np.ndarray] = {loss.id: np.ones(loss.shape, dtype=loss.dtype)}
    for entry in reversed(tape.entries):
        upstream = grads.get(entry.output)
        if upstream is None:
            continue
        input_grads = entry.backward(upstream)
        for node_id, g in zip(entry.inputs, input_grads):
            if g is None:
                continue
            prev = grads.get(node_id)
            grads[node_id] = g if prev is None else prev + g

    tape.grads = grads
    tape.consumed = True

    out: dict[str, np.ndarray] = {}
    for node_id, param in tape.params.items():
        g = grads.get(node_id)
        if g is None:
            g = np.zeros(param.shape, dtype=param.value.dtype)
        g = np.asarray(g, dtype=param.grad.dtype).reshape(param.shape)
        param.grad = param.grad + g
        out[param.name] = g
    logger.debug("backward: %d entries, %d parameters", len(tape.entries), len(out))
    return out

"""
Exception hierarchy shared by every subpackage.
The CLI maps ConfigError / missing inputs to exit code 2 and everything else to 1.
"""
from __future__ import annotations

from typing import Optional, Sequence


class DynPoolError(Exception):
    """Root of all errors raised by this package."""


class ConfigError(DynPoolError, ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"invalid config field '{field}': {message}")


class ShapeError(DynPoolError, ValueError):
    def __init__(self, op: str, expected, actual):
        self.op = op
        self.expected = expected
        self.actual = actual
        super().__init__(f"{op}: expected shape {expected}, got {actual}")


class TapeError(DynPoolError, RuntimeError):
    """Misuse of the differentiation tape (backward before forward, non-scalar loss, ...)."""


class NonFiniteError(DynPoolError, FloatingPointError):
    def __init__(self, where: str, detail: str = ""):
        self.where = where
        msg = f"non-finite values in {where}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class UnalignableError(DynPoolError, ValueError):
    def __init__(self, input_length: int, target_length: int):
        self.input_length = input_length
        self.target_length = target_length
        super().__init__(
            f"unalignable: {input_length} output steps cannot emit {target_length} symbols"
        )


class CheckpointError(DynPoolError, ValueError):
    def __init__(
        self,
        message: str,
        missing: Optional[Sequence[str]] = None,
        unexpected: Optional[Sequence[str]] = None,
    ):
        self.missing = list(missing or [])
        self.unexpected = list(unexpected or [])
        parts = [message]
        if self.missing:
            parts.append(f"missing tensors: {', '.join(self.missing)}")
        if self.unexpected:
            parts.append(f"unexpected tensors: {', '.join(self.unexpected)}")
        super().__init__("; ".join(parts))


class TrainingDivergedError(DynPoolError, RuntimeError):
    def __init__(self, step: int, last_checkpoint: Optional[str]):
        self.step = step
        self.last_checkpoint = last_checkpoint
        kept = last_checkpoint or "none written yet"
        super().__init__(f"loss became non-finite at step {step}; last good checkpoint: {kept}")

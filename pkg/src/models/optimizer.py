"""
AdamW with decoupled weight decay.
Moments live in float64 next to each parameter; the parameter value is replaced,
never mutated in place.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from src.autodiff.tensor import Parameter
from src.errors import NonFiniteError

logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    step: int = 0
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)


class AdamW:
    def __init__(
        self,
        params: Iterable[Parameter],
        weight_decay: float = 0.01,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        no_decay: Optional[Iterable[str]] = None,
    ):
        self.params = list(params)
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        # norm scales, biases and tables of one-dimensional offsets are not decayed
        self.no_decay = set(no_decay) if no_decay is not None else {
            p.name for p in self.params if p.value.ndim <= 1 or p.name.endswith("bias")
        }
        self.state = OptimizerState()
        for p in self.params:
            self.state.first[p.name] = np.zeros(p.shape)
            self.state.second[p.name] = np.zeros(p.shape)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float) -> None:
        """One update from the gradients accumulated on each Parameter."""
        for p in self.params:
            if not np.isfinite(p.grad).all():
                raise NonFiniteError(f"gradient of {p.name}")

        self.state.step += 1
        t = self.state.step
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        for p in self.params:
            g = p.grad.astype(np.float64)
            m = self.state.first[p.name] = b1 * self.state.first[p.name] + (1.0 - b1) * g
            v = self.state.second[p.name] = b2 * self.state.second[p.name] + (1.0 - b2) * g * g
            value = p.value.data.astype(np.float64)
            if self.weight_decay and p.name not in self.no_decay:
                value = value * (1.0 - lr * self.weight_decay)
            value = value - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.assign(value)
        logger.debug("adamw step %d lr=%.3g", t, lr)

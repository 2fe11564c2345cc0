"""
Parameterized layers built on the functional ops.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from src.autodiff.ops import apply_op
from src.autodiff.tensor import Tensor
from src.config import Conv1dSpec, RFGroupSpec
from src.nn import functional as F
from src.nn.module import Module


class Conv1d(Module):
    """Full or depthwise 1-D convolution; weights (C_out, D, C_in) or (C, D) for depthwise."""

    def __init__(self, spec: Conv1dSpec, rng: np.random.Generator, glu_init: bool = False):
        super().__init__()
        self.spec = spec
        if spec.depthwise:
            W = F.kaiming(rng, (spec.c_out, spec.kernel), spec.kernel)
        else:
            W = F.kaiming(rng, (spec.c_out, spec.kernel, spec.c_in), spec.c_in * spec.kernel)
        if glu_init:
            W = F.glu_init(W)
        self.weight = self.add_param("weight", W)
        self.bias = self.add_param("bias", np.zeros(spec.c_out)) if spec.bias else None

    def forward(self, x: Tensor) -> Tensor:
        op = F.depthwise_conv1d if self.spec.depthwise else F.conv1d
        b = self.bias.use() if self.bias is not None else Tensor(np.zeros(self.spec.c_out))
        return op(x, self.weight.use(), b, stride=self.spec.stride)


def pointwise(c_in: int, c_out: int, rng: np.random.Generator, glu_init: bool = False) -> Conv1d:
    return Conv1d(Conv1dSpec(c_in=c_in, c_out=c_out, kernel=1), rng, glu_init=glu_init)


class BatchNorm(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = self.add_param("gamma", np.ones(channels))
        self.beta = self.add_param("beta", np.zeros(channels))
        self.add_buffer("running_mean", np.zeros(channels))
        self.add_buffer("running_var", np.ones(channels))

    def forward(self, x: Tensor) -> Tensor:
        if self.training:
            y, (mu, var) = apply_op("batch_norm", x, self.gamma.use(), self.beta.use(), eps=self.eps)
            m = self.momentum
            self.set_buffer("running_mean", (1 - m) * self.buffer("running_mean") + m * mu)
            self.set_buffer("running_var", (1 - m) * self.buffer("running_var") + m * var)
            return y
        return apply_op(
            "batch_norm_eval", x, self.gamma.use(), self.beta.use(),
            running_mean=self.buffer("running_mean"), running_var=self.buffer("running_var"), eps=self.eps,
        )


class ConvBNAct(Module):
    def __init__(self, spec: Conv1dSpec, rng: np.random.Generator, activation: Optional[str] = "swish"):
        super().__init__()
        self.activation = activation
        glu = activation == "glu"
        if glu:
            spec = spec.model_copy(update={"c_out": 2 * spec.c_out})
        self.conv = self.add_child("conv", Conv1d(spec, rng, glu_init=glu))
        self.bn = self.add_child("bn", BatchNorm(spec.c_out))

    def forward(self, x: Tensor) -> Tensor:
        y = self.bn(self.conv(x))
        return F.activation(y, self.activation) if self.activation else y


class RFGroupDepthwise(Module):
    """Depthwise convolutions with a different kernel per channel group (2:2:1:1 by default)."""

    def __init__(self, spec: RFGroupSpec, rng: np.random.Generator):
        super().__init__()
        self.spec = spec
        self.bounds: list[tuple[int, int]] = []
        start = 0
        for g, (size, kernel) in enumerate(zip(spec.group_sizes(), spec.kernels)):
            conv = Conv1d(Conv1dSpec(c_in=size, c_out=size, kernel=kernel, depthwise=True), rng)
            self.add_child(f"group{g}", conv)
            self.bounds.append((start, start + size))
            start += size

    def forward(self, x: Tensor) -> Tensor:
        parts = [
            self._children[f"group{g}"](F.channel_slice(x, lo, hi))
            for g, (lo, hi) in enumerate(self.bounds)
        ]
        return F.concat(parts)

"""
Skip-connected convolutional blocks with optional space-to-depth compression.

Main branch: [cross_shift] -> [compress x3 time, x2 channels] -> repeats of
(depthwise or RF-group conv -> pointwise -> BN -> act) -> [decompress -> BN].
Without compression the last repeat skips its activation; the skip branch
(pointwise -> BN) is added before the final activation.
"""
from __future__ import annotations

import numpy as np

from src.autodiff.tensor import Tensor
from src.config import BlockSpec, Conv1dSpec, RFGroupSpec
from src.errors import ConfigError
from src.nn import functional as F
from src.nn.layers import BatchNorm, Conv1d, RFGroupDepthwise, pointwise
from src.nn.module import Module

FACTOR = 3


class SpaceToDepth(Module):
    """heron: fold 3 steps onto channels then pointwise; osprey: mean-pool 3 then pointwise."""

    def __init__(self, style: str, c_in: int, c_out: int, rng: np.random.Generator):
        super().__init__()
        self.style = style
        fan = FACTOR * c_in if style == "heron" else c_in
        self.proj = self.add_child("proj", pointwise(fan, c_out, rng))

    def forward(self, x: Tensor) -> Tensor:
        if self.style == "heron":
            return self.proj(F.time_fold(x, FACTOR))
        return self.proj(F.mean_pool(x, FACTOR))


class DepthToSpace(Module):
    """
    heron: one pointwise conv to 3*C_out channels, unfolded into 3 time phases
    (a transposed conv with kernel = stride = 3).
    osprey: three pointwise convs over overlapping channel groups of width
    inner/2 at offsets 0, inner/4 and inner/2; conv k yields phase k.
    """

    def __init__(self, style: str, inner: int, c_out: int, rng: np.random.Generator, glu_init: bool = False):
        super().__init__()
        self.style = style
        if style == "heron":
            conv = pointwise(inner, FACTOR * c_out, rng)
            if glu_init:
                W = np.array(conv.weight.value.data).reshape(FACTOR, c_out, 1, inner)
                W[:, c_out // 2:] = W[:, : c_out // 2]
                conv.weight.assign(W.reshape(FACTOR * c_out, 1, inner))
            self.proj = self.add_child("proj", conv)
        else:
            if inner % 4:
                raise ConfigError("channels", f"osprey decompression needs inner channels divisible by 4, got {inner}")
            width, step = inner // 2, inner // 4
            self.groups = [(k * step, k * step + width) for k in range(FACTOR)]
            for k in range(FACTOR):
                self.add_child(f"phase{k}", pointwise(width, c_out, rng, glu_init=glu_init))

    def forward(self, x: Tensor, length: int) -> Tensor:
        if self.style == "heron":
            return F.time_unfold(self.proj(x), FACTOR, length)
        phases = [
            self._children[f"phase{k}"](F.channel_slice(x, lo, hi))
            for k, (lo, hi) in enumerate(self.groups)
        ]
        return F.time_unfold(F.concat(phases), FACTOR, length)


class Block(Module):
    def __init__(self, spec: BlockSpec, c_in: int, rng: np.random.Generator):
        super().__init__()
        self.spec = spec
        if spec.cross_shift and c_in % 2:
            raise ConfigError("cross_shift", f"needs an even input channel count, got {c_in}")
        glu = spec.activation == "glu"
        mult = 2 if glu else 1
        C = spec.channels
        target = spec.inner_channels

        width = c_in
        if spec.s2d:
            self.add_child("compress", SpaceToDepth(spec.s2d, c_in, target, rng))
            width = target

        self.act_after: list[bool] = []
        for r in range(spec.repeats):
            last = r == spec.repeats - 1
            if spec.rf_groups:
                dw = RFGroupDepthwise(RFGroupSpec(channels=width), rng)
            else:
                dw = Conv1d(Conv1dSpec(c_in=width, c_out=width, kernel=spec.kernel, depthwise=True), rng)
            self.add_child(f"dw{r}", dw)
            self.add_child(f"pw{r}", pointwise(width, target * mult, rng, glu_init=glu))
            self.add_child(f"bn{r}", BatchNorm(target * mult, spec.momentum, spec.eps))
            self.act_after.append(bool(spec.s2d) or not last)
            width = target

        if spec.s2d:
            self.add_child("decompress", DepthToSpace(spec.s2d, target, C * mult, rng, glu_init=glu))
            self.add_child("bn_out", BatchNorm(C * mult, spec.momentum, spec.eps))
        self.add_child("skip", pointwise(c_in, C * mult, rng, glu_init=glu))
        self.add_child("skip_bn", BatchNorm(C * mult, spec.momentum, spec.eps))

    @property
    def out_channels(self) -> int:
        return self.spec.channels

    def forward(self, x: Tensor) -> Tensor:
        spec = self.spec
        c = self._children
        T = x.shape[1]
        h = F.cross_shift(x) if spec.cross_shift else x
        if spec.s2d:
            h = c["compress"](h)
        for r, act in enumerate(self.act_after):
            h = c[f"bn{r}"](c[f"pw{r}"](c[f"dw{r}"](h)))
            if act:
                h = F.activation(h, spec.activation)
        if spec.s2d:
            h = c["bn_out"](c["decompress"](h, T))
        s = c["skip_bn"](c["skip"](x))
        return F.activation(h + s, spec.activation)

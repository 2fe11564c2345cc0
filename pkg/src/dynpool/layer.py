"""
The subsampling layer of a basecaller network: either a strided convolution or
dynamic pooling in its place, followed by batch norm and Swish.

Both variants live under the same module name, so checkpoints of the fixed and
dynamic presets differ only in tensors below `pool.`.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from src.autodiff.ops import apply_op, reshape, sigmoid
from src.autodiff.tensor import Tensor
from src.config import Conv1dSpec, PoolSpec
from src.dynpool.pooling import PoolingTrace, dynamic_pool, renormalize_batch
from src.errors import NonFiniteError
from src.nn import functional as F
from src.nn.layers import BatchNorm, Conv1d, pointwise
from src.nn.module import Module

logger = logging.getLogger(__name__)


class MWNet(Module):
    """Produces (m, w) in (0,1): pointwise on pool inputs, or a 3-layer conv net on the raw signal."""

    def __init__(self, spec: PoolSpec, c_in: int, raw_channels: int, rng: np.random.Generator):
        super().__init__()
        self.kind = spec.mw_net
        if self.kind == "pointwise":
            self.add_child("conv0", pointwise(c_in, 2, rng))
        else:
            widths = [raw_channels, spec.mw_channels, spec.mw_channels, 2]
            for k in range(3):
                conv = Conv1d(Conv1dSpec(c_in=widths[k], c_out=widths[k + 1], kernel=spec.mw_kernel), rng)
                self.add_child(f"conv{k}", conv)

    def forward(self, x: Tensor, raw: Tensor) -> Tensor:
        if self.kind == "pointwise":
            return sigmoid(self._children["conv0"](x))
        h = raw
        for k in range(3):
            h = self._children[f"conv{k}"](h)
            h = F.swish(h) if k < 2 else sigmoid(h)
        return h


class DynamicPool(Module):
    """
    Sub-networks f (features), m (length factor) and w (importance), the target
    mean length factor S, and a running average of S/M used at inference.
    """

    def __init__(self, spec: PoolSpec, c_in: int, raw_channels: int, rng: np.random.Generator):
        super().__init__()
        self.spec = spec
        self.target = spec.target
        self.f_net = self.add_child(
            "f_net", Conv1d(Conv1dSpec(c_in=c_in, c_out=spec.channels, kernel=spec.kernel), rng)
        )
        self.mw_net = self.add_child("mw_net", MWNet(spec, c_in, raw_channels, rng))
        self.add_buffer("ema_ratio", np.ones(1))
        self.add_buffer("ema_steps", np.zeros(1))
        self.last_ratio: Optional[float] = None

    @property
    def ema_ratio(self) -> float:
        return float(self.buffer("ema_ratio")[0])

    def _update_ema(self, ratio: float) -> None:
        steps = float(self.buffer("ema_steps")[0])
        mom = self.spec.ema_momentum
        ema = ratio if steps == 0 else mom * self.ema_ratio + (1.0 - mom) * ratio
        self.set_buffer("ema_ratio", [ema])
        self.set_buffer("ema_steps", [steps + 1])

    def forward(self, x: Tensor, raw: Tensor, read_ids: Optional[list[str]] = None) -> tuple[Tensor, list[PoolingTrace]]:
        B, T, _ = x.shape
        f = self.f_net(x)
        if self.spec.sigmoid_features:
            f = sigmoid(f)
        mw = self.mw_net(x, raw)
        if not np.isfinite(mw.data).all():
            raise NonFiniteError("dynpool.mw_net")
        m = reshape(F.channel_slice(mw, 0, 1), (B, T))
        w = reshape(F.channel_slice(mw, 1, 2), (B, T))

        if self.training:
            m_prime, ratio = renormalize_batch(m, self.target, self.spec.detach_mean)
            self.last_ratio = ratio
            self._update_ema(ratio)
        else:
            m_prime = apply_op("scale", m, factor=self.ema_ratio)
        return dynamic_pool(f, w, m_prime, self.spec.trunc_window, read_ids)


class SubsamplingLayer(Module):
    def __init__(self, spec: PoolSpec, c_in: int, raw_channels: int, rng: np.random.Generator):
        super().__init__()
        self.spec = spec
        if spec.kind == "dynpool":
            self.add_child("dyn", DynamicPool(spec, c_in, raw_channels, rng))
        else:
            conv_spec = Conv1dSpec(c_in=c_in, c_out=spec.channels, kernel=spec.kernel, stride=spec.stride)
            self.add_child("conv", Conv1d(conv_spec, rng))
        self.bn = self.add_child("bn", BatchNorm(spec.channels))

    @property
    def dynamic(self) -> Optional[DynamicPool]:
        return self._children.get("dyn")  # type: ignore[return-value]

    def forward(self, x: Tensor, raw: Tensor, read_ids: Optional[list[str]] = None):
        """Returns (pooled features, per-read output lengths, traces or None)."""
        if self.dynamic is not None:
            y, traces = self.dynamic(x, raw, read_ids)
            lengths = np.array([t.output_length for t in traces], dtype=np.int64)
        else:
            y = self._children["conv"](x)
            lengths = np.full(x.shape[0], y.shape[1], dtype=np.int64)
            traces = None
        return F.swish(self.bn(y)), lengths, traces

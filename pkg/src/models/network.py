"""
Basecaller network assembled from a ModelConfig:
stem convolutions -> subsampling (strided conv or dynamic pooling) -> blocks -> head.

Tensor names are stable across the fixed and dynamic variants of a preset
outside `pool.`, so their checkpoints differ only in the swapped layer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.autodiff.tensor import Tensor
from src.config import Conv1dSpec, ModelConfig
from src.decoders.alphabet import N_CLASSES
from src.decoders.ctc import ctc_loss
from src.decoders.rna import RNAHead
from src.dynpool.layer import SubsamplingLayer
from src.dynpool.pooling import PoolingTrace
from src.nn.blocks import Block
from src.nn.layers import ConvBNAct, pointwise
from src.nn.module import Module


@dataclass
class NetOutput:
    features: Tensor                       # [B, L, 5] logits (CTC) or [B, L, H] (RNA)
    lengths: np.ndarray                    # valid output steps per read
    traces: Optional[list[PoolingTrace]]   # dynamic pooling only


class BasecallerNet(Module):
    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__()
        self.config = config
        # independent stream per stage: stem, pool, blocks, head
        rngs = [np.random.default_rng([seed, stage]) for stage in range(4)]

        width = config.in_channels
        self.n_stem = len(config.stem)
        for i, layer in enumerate(config.stem):
            spec = Conv1dSpec(c_in=width, c_out=layer.channels, kernel=layer.kernel)
            self.add_child(f"stem{i}", ConvBNAct(spec, rngs[0], activation="swish"))
            width = layer.channels

        self.pool = self.add_child("pool", SubsamplingLayer(config.pool, width, config.in_channels, rngs[1]))
        width = config.pool.channels

        self.n_blocks = len(config.blocks)
        for i, spec in enumerate(config.blocks):
            block = self.add_child(f"block{i}", Block(spec, width, rngs[2]))
            width = block.out_channels

        head = config.head
        if head.decoder == "ctc":
            self.add_child("out", pointwise(width, N_CLASSES, rngs[3]))
            self.rna = None
        else:
            self.add_child("out", pointwise(width, head.features, rngs[3]))
            self.rna = self.add_child("rna", RNAHead(head.features, rngs[3], k=head.context_order))

    @property
    def decoder(self) -> str:
        return self.config.head.decoder

    def forward(self, signal: Tensor, read_ids: Optional[list[str]] = None) -> NetOutput:
        """signal [B, T, in_channels]"""
        c = self._children
        h = signal
        for i in range(self.n_stem):
            h = c[f"stem{i}"](h)
        h, lengths, traces = self.pool(h, signal, read_ids)
        for i in range(self.n_blocks):
            h = c[f"block{i}"](h)
        return NetOutput(c["out"](h), lengths, traces)

    def loss(self, features: Tensor, targets: Sequence[np.ndarray], lengths: np.ndarray) -> Tensor:
        """Per-read negative log-likelihood [B]."""
        if self.rna is not None:
            return self.rna.loss(features, targets, lengths)
        return ctc_loss(features, targets, lengths, collapse_repeats=self.config.head.collapse_repeats)

    def n_parameters(self) -> int:
        return int(sum(p.value.size for p in self.parameters()))


def build_model(config: ModelConfig, seed: int = 0) -> BasecallerNet:
    return BasecallerNet(config, seed)

"""
Dynamic pooling: learned length factors time-warp the input, then a triangular
(nearest-neighbour) kernel resamples it onto integer output positions.

Conventions (0-indexed):
    P_i = sum_{k<=i} m'_k          prefix positions
    q_i = P_i - 1                   pooled position of input point i
    L   = ceil(P_{T-1})             output length
    r_j = sum_{i: |q_i - j| <= 1} f_i w_i (1 - |q_i - j|),  j = 0..L-1

With m' = w = 1 every point lands on its own index, so r = f. Mass that falls
on j = -1 is dropped. The backward pass through the prefix sum is truncated:
dL/dm'_j = sum_{k=j}^{min(T-1, j+W)} dL/dq_k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.autodiff.ops import apply_op, expect_shape, register_op
from src.autodiff.tensor import Tensor
from src.errors import NonFiniteError

TRUNC_WINDOW = 20


@dataclass
class PoolingTrace:
    positions: np.ndarray            # P_i, nondecreasing
    output_length: int               # ceil(P_{T-1})
    mean_length_factor: float
    read_id: Optional[str] = None
    length_factors: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def pooled_positions(self) -> np.ndarray:
        """q_i: the output coordinate each input point is resampled to."""
        return self.positions - 1.0


def output_length(trace: PoolingTrace) -> int:
    return trace.output_length


def truncated_suffix_sum(dq: np.ndarray, window: int) -> np.ndarray:
    """out[..., j] = sum of dq[..., j : j + window + 1] along the last axis."""
    T = dq.shape[-1]
    rev = np.cumsum(dq[..., ::-1].astype(np.float64), axis=-1)[..., ::-1]
    padded = np.concatenate([rev, np.zeros(dq.shape[:-1] + (window + 1,))], axis=-1)
    return (padded[..., :T] - padded[..., window + 1:window + 1 + T]).astype(dq.dtype)


@register_op("dynamic_pool")
def _dynamic_pool(f, w, m, trunc_window: int = TRUNC_WINDOW):
    B, T, C = f.shape
    expect_shape("dynamic_pool.w", w, (B, T))
    expect_shape("dynamic_pool.m", m, (B, T))
    for name, arr in (("f", f), ("w", w), ("m", m)):
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"dynamic_pool.{name}")
    if (m < 0).any():
        raise ValueError("dynamic_pool: length factors must be non-negative")

    P = np.cumsum(m.astype(np.float64), axis=1)
    q = P - 1.0
    j0 = np.floor(q).astype(np.int64)
    frac = (q - j0).astype(f.dtype)
    lengths = np.ceil(P[:, -1]).astype(np.int64) if T else np.zeros(B, dtype=np.int64)
    L_max = int(lengths.max()) if B else 0
    stride = L_max + 2  # slot 0 holds j = -1, slot L_max + 1 absorbs zero-weight overflow

    base = (np.arange(B, dtype=np.int64) * stride)[:, None]
    idx0 = (base + j0 + 1).reshape(-1)
    idx1 = idx0 + 1
    lo = (1.0 - frac)[..., None]
    hi = frac[..., None]
    contrib = f * w[..., None]

    buf = np.zeros((B * stride, C), dtype=f.dtype)
    np.add.at(buf, idx0, (contrib * lo).reshape(-1, C))
    np.add.at(buf, idx1, (contrib * hi).reshape(-1, C))
    y = buf.reshape(B, stride, C)[:, 1:L_max + 1]

    def backward(g):
        gp = np.zeros((B, stride, C), dtype=g.dtype)
        gp[:, 1:L_max + 1] = g
        flat = gp.reshape(B * stride, C)
        G0 = flat[idx0].reshape(B, T, C)
        G1 = flat[idx1].reshape(B, T, C)
        mix = lo * G0 + hi * G1
        df = w[..., None] * mix
        dw = (f * mix).sum(axis=-1)
        dq = w * (f * (G1 - G0)).sum(axis=-1)
        return df, dw, truncated_suffix_sum(dq, trunc_window)

    return y, backward, (P, lengths)


@register_op("renormalize")
def _renormalize(m, target: float, detach_mean: bool = False):
    n = m.size
    M = float(m.astype(np.float64).mean()) if n else 0.0
    if not M > 0 or not math.isfinite(M):
        raise NonFiniteError("renormalize", f"batch mean length factor is {M}")
    ratio = target / M
    out = (m.astype(np.float64) * ratio).astype(m.dtype)

    def backward(g):
        d = g.astype(np.float64) * ratio
        if not detach_mean:
            d -= (ratio / (M * n)) * float((g.astype(np.float64) * m).sum())
        return (d.astype(g.dtype),)

    return out, backward, ratio


def renormalize_batch(m: Tensor, target: float, detach_mean: bool = False) -> tuple[Tensor, float]:
    """m' = m * S / M with M the batch mean; returns (m', S / M)."""
    return apply_op("renormalize", m, target=float(target), detach_mean=detach_mean)


def dynamic_pool(
    f: Tensor, w: Tensor, m: Tensor, trunc_window: int = TRUNC_WINDOW,
    read_ids: Optional[list[str]] = None,
) -> tuple[Tensor, list[PoolingTrace]]:
    """Pool f [B,T,C] with importances w [B,T] and renormalized factors m [B,T]."""
    y, (P, lengths) = apply_op("dynamic_pool", f, w, m, trunc_window=trunc_window)
    traces = []
    for b in range(P.shape[0]):
        factors = np.asarray(m.data[b], dtype=np.float64)
        traces.append(PoolingTrace(
            positions=P[b],
            output_length=int(lengths[b]),
            mean_length_factor=float(factors.mean()) if factors.size else 0.0,
            read_id=read_ids[b] if read_ids else None,
            length_factors=factors,
        ))
    return y, traces


def pool_from_positions(f: np.ndarray, w: np.ndarray, q: np.ndarray, length: int) -> np.ndarray:
    """Single-read resampling from explicit pooled positions q (point by point)."""
    T, C = f.shape
    out = np.zeros((length, C), dtype=np.float64)
    for i in range(T):
        j0 = math.floor(q[i])
        frac = q[i] - j0
        for j, weight in ((j0, 1.0 - frac), (j0 + 1, frac)):
            if 0 <= j < length:
                out[j] += f[i] * w[i] * weight
    return out

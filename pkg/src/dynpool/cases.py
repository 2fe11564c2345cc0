"""Gradient-check cases for dynamic pooling and batch renormalization."""
from __future__ import annotations

import math

import numpy as np

from src.autodiff.gradcheck import grad_case
from src.autodiff.ops import apply_op
from src.dynpool.pooling import TRUNC_WINDOW, pool_from_positions

MARGIN = 0.05


def kink_safe_factors(rng: np.random.Generator, B: int, T: int, low: float = 0.2, high: float = 0.9) -> np.ndarray:
    """Length factors whose pooled positions all keep MARGIN away from integers."""
    m = np.empty((B, T))
    for b in range(B):
        q = -1.0
        for i in range(T):
            while True:
                step = rng.uniform(low, high)
                frac = (q + step) - math.floor(q + step)
                if MARGIN <= frac <= 1.0 - MARGIN:
                    break
            m[b, i] = step
            q += step
    return m


def _fw_sample(rng):
    B, T, C = 2, 12, 3
    return [rng.uniform(0.05, 0.95, (B, T, C)), rng.uniform(0.05, 0.95, (B, T)), kink_safe_factors(rng, B, T)]


def _m_sample(rng):
    B, T, C = 1, 30, 2
    return [rng.uniform(0.05, 0.95, (B, T, C)), rng.uniform(0.05, 0.95, (B, T)), kink_safe_factors(rng, B, T)]


def truncated_surrogate(arrays, k, idx, delta, window: int = TRUNC_WINDOW):
    """
    Forward where perturbing m'_j moves only q_j .. q_{j+window}; positions past
    the window and the output length stay frozen.
    """
    f, w, m = arrays
    B, T = m.shape
    P = np.cumsum(m, axis=1)
    lengths = np.ceil(P[:, -1]).astype(int)
    q = P - 1.0
    b, j = divmod(idx, T)
    q[b, j:j + window + 1] += delta
    out = np.zeros((B, int(lengths.max()), f.shape[2]))
    for r in range(B):
        out[r, :lengths[r]] = pool_from_positions(f[r], w[r], q[r], int(lengths[r]))
    return out


@grad_case("dynamic_pool_fw", ("f", "w", "m"), _fw_sample, check=(0, 1))
def _dynamic_pool_fw(f, w, m):
    y, _ = apply_op("dynamic_pool", f, w, m, trunc_window=TRUNC_WINDOW)
    return y


@grad_case("dynamic_pool_m", ("f", "w", "m"), _m_sample, check=(2,), numeric=truncated_surrogate)
def _dynamic_pool_m(f, w, m):
    y, _ = apply_op("dynamic_pool", f, w, m, trunc_window=TRUNC_WINDOW)
    return y


@grad_case("renormalize", ("m",), lambda rng: [rng.uniform(0.1, 0.9, (2, 5))])
def _renormalize(m):
    y, _ = apply_op("renormalize", m, target=1.0 / 3.0)
    return y

"""
Log-space forward-backward over the plain-drop alignment lattice.

State j counts emitted symbols. At step i the path either stays (blank, log
prob lb[i, j]) or emits z_j (log prob le[i, j]):
    alpha[i+1, j] = logaddexp(alpha[i, j] + lb[i, j], alpha[i, j-1] + le[i, j-1])
Padded steps (i >= input length) carry lb = 0 and le = -inf.
"""
from __future__ import annotations

import numpy as np

NEG_INF = -np.inf


def _shift_right(a: np.ndarray) -> np.ndarray:
    out = np.full_like(a, NEG_INF)
    out[..., 1:] = a[..., :-1]
    return out


def lattice_forward_backward(
    log_blank: np.ndarray,
    log_emit: np.ndarray,
    in_lengths: np.ndarray,
    tgt_lengths: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    log_blank [B, L, M+1], log_emit [B, L, M] (float64 preferred).
    Returns (log-likelihood [B], blank occupancy [B, L, M+1], emit occupancy [B, L, M]),
    occupancies being posterior probabilities of taking each transition.
    """
    B, L, M1 = log_blank.shape
    M = M1 - 1
    lb = np.array(log_blank, dtype=np.float64)
    le = np.array(log_emit, dtype=np.float64)
    steps = np.arange(L)[None, :]
    pad = steps >= np.asarray(in_lengths)[:, None]
    lb[pad] = 0.0
    le[pad] = NEG_INF
    # emissions past a read's target are impossible
    le = np.where(np.arange(M)[None, None, :] >= np.asarray(tgt_lengths)[:, None, None], NEG_INF, le)

    alpha = np.full((B, L + 1, M1), NEG_INF)
    alpha[:, 0, 0] = 0.0
    with np.errstate(invalid="ignore"):
        for i in range(L):
            stay = alpha[:, i] + lb[:, i]
            move = np.full((B, M1), NEG_INF)
            if M:
                move[:, 1:] = alpha[:, i, :-1] + le[:, i]
            alpha[:, i + 1] = np.logaddexp(stay, move)

        beta = np.full((B, L + 1, M1), NEG_INF)
        beta[np.arange(B), L, np.asarray(tgt_lengths)] = 0.0
        for i in range(L - 1, -1, -1):
            stay = beta[:, i + 1] + lb[:, i]
            move = np.full((B, M1), NEG_INF)
            if M:
                move[:, :-1] = beta[:, i + 1, 1:] + le[:, i]
            beta[:, i] = np.logaddexp(stay, move)

        ll = alpha[np.arange(B), L, np.asarray(tgt_lengths)]
        finite = np.isfinite(ll)
        ll_safe = np.where(finite, ll, 0.0)[:, None, None]
        occ_blank = np.exp(alpha[:, :L] + lb + beta[:, 1:] - ll_safe)
        occ_emit = np.exp(alpha[:, :L, :-1] + le + beta[:, 1:, 1:] - ll_safe) if M else np.zeros((B, L, 0))
    occ_blank[pad] = 0.0
    occ_blank[~finite] = 0.0
    occ_emit[~finite] = 0.0
    return ll, np.nan_to_num(occ_blank), np.nan_to_num(occ_emit)

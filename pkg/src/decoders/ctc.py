"""
CTC loss, greedy and prefix-beam decoding over the 5-class blank alphabet.

The default reduction R only drops blanks, so "AA" on two steps reads as "AA".
With collapse_repeats=True the usual blank-separated CTC reduction applies.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from src.autodiff.ops import apply_op, register_op
from src.autodiff.tensor import Tensor
from src.decoders.alphabet import BLANK, N_CLASSES, decode, encode, reduce_path
from src.decoders.lattice import NEG_INF, lattice_forward_backward
from src.errors import ShapeError, UnalignableError

LOG_FLOOR = -30.0


def log_softmax(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    top = x.max(axis=-1, keepdims=True)
    shifted = x - top
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


# ── collapse-repeats lattice ──────────────────────────────────────────────────

def _extended(target: np.ndarray) -> np.ndarray:
    ext = np.full(2 * len(target) + 1, BLANK, dtype=np.int64)
    ext[1::2] = target
    return ext


def collapse_forward_backward(logp: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Standard CTC over the blank-interleaved label; returns (ll, class counts [L,5], state posteriors [L,S])."""
    L = logp.shape[0]
    ext = _extended(target)
    S = len(ext)
    if L == 0:
        return (0.0 if S == 1 else NEG_INF), np.zeros((0, N_CLASSES)), np.zeros((0, S))
    skip = np.zeros(S, dtype=bool)
    skip[2:] = (ext[2:] != BLANK) & (ext[2:] != ext[:-2])
    emit = logp[:, ext]  # [L, S]

    def shift(a, k):
        out = np.full_like(a, NEG_INF)
        out[k:] = a[:-k]
        return out

    def unshift(a, k):
        out = np.full_like(a, NEG_INF)
        out[:-k] = a[k:]
        return out

    alpha = np.full((L, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, L):
        a = alpha[t - 1]
        cand = np.logaddexp(a, shift(a, 1))
        if S > 2:
            cand = np.where(skip, np.logaddexp(cand, shift(a, 2)), cand)
        alpha[t] = cand + emit[t]
    finals = [S - 1] + ([S - 2] if S > 1 else [])
    ll = float(np.logaddexp.reduce(alpha[L - 1, finals]))

    beta = np.full((L, S), NEG_INF)
    beta[L - 1, finals] = 0.0
    skip_from = np.zeros(S, dtype=bool)
    skip_from[:-2] = skip[2:]
    for t in range(L - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        cand = np.logaddexp(nxt, unshift(nxt, 1))
        if S > 2:
            cand = np.where(skip_from, np.logaddexp(cand, unshift(nxt, 2)), cand)
        beta[t] = cand

    if not np.isfinite(ll):
        return ll, np.zeros((L, N_CLASSES)), np.zeros((L, S))
    gamma = np.exp(alpha + beta - ll)
    onehot = np.zeros((S, N_CLASSES))
    onehot[np.arange(S), ext] = 1.0
    return ll, gamma @ onehot, gamma


# ── loss ──────────────────────────────────────────────────────────────────────

def _plain_counts(logp, targets, in_lengths):
    B, L, _ = logp.shape
    tgt_lengths = np.array([len(z) for z in targets], dtype=np.int64)
    M = int(tgt_lengths.max()) if B else 0
    lb = np.repeat(logp[..., BLANK:BLANK + 1], M + 1, axis=-1)
    le = np.full((B, L, M), NEG_INF)
    for b, z in enumerate(targets):
        le[b, :, :len(z)] = logp[b][:, z]
    ll, ob, oe = lattice_forward_backward(lb, le, in_lengths, tgt_lengths)
    counts = np.zeros((B, L, N_CLASSES))
    counts[..., BLANK] = ob.sum(axis=-1)
    for b, z in enumerate(targets):
        onehot = np.zeros((len(z), 4))
        onehot[np.arange(len(z)), z] = 1.0
        counts[b, :, :4] = oe[b, :, :len(z)] @ onehot
    return ll, counts


@register_op("ctc_nll")
def _ctc_nll(logits, targets: tuple, in_lengths: np.ndarray, collapse_repeats: bool = False):
    """Per-read negative log-likelihood [B] of the targets under R."""
    B, L, K = logits.shape
    if K != N_CLASSES:
        raise ShapeError("ctc_nll", (B, L, N_CLASSES), logits.shape)
    in_lengths = np.asarray(in_lengths, dtype=np.int64)
    targets = [np.asarray(z, dtype=np.int64) for z in targets]
    for n, z in zip(in_lengths, targets):
        if len(z) > n:
            raise UnalignableError(int(n), len(z))

    logp = log_softmax(logits)
    if collapse_repeats:
        ll = np.empty(B)
        counts = np.zeros((B, L, N_CLASSES))
        for b, z in enumerate(targets):
            n = int(in_lengths[b])
            ll[b], counts[b, :n], _ = collapse_forward_backward(logp[b, :n], z)
    else:
        ll, counts = _plain_counts(logp, targets, in_lengths)
    for b in range(B):
        if not np.isfinite(ll[b]):
            raise UnalignableError(int(in_lengths[b]), len(targets[b]))

    valid = (np.arange(L)[None, :] < in_lengths[:, None])[..., None]
    probs = np.exp(logp) * valid

    def backward(g):
        grad = np.asarray(g, dtype=np.float64)[:, None, None] * (probs - counts)
        return (grad.astype(logits.dtype),)

    return (-ll).astype(logits.dtype), backward


def ctc_loss(logits: Tensor, targets: Sequence[np.ndarray], in_lengths, collapse_repeats: bool = False) -> Tensor:
    """Per-read CTC negative log-likelihood; logits [B, L, 5]."""
    return apply_op(
        "ctc_nll", logits, targets=tuple(targets), in_lengths=np.asarray(in_lengths), collapse_repeats=collapse_repeats,
    )


def sequence_log_likelihood(logits: np.ndarray, sequence: str, collapse_repeats: bool = False) -> float:
    """log sum_{Y: R(Y)=Z} p_Y for one read (logits [L, 5])."""
    logp = log_softmax(logits)
    z = encode(sequence)
    L = logp.shape[0]
    if len(z) > L:
        return NEG_INF
    if collapse_repeats:
        return collapse_forward_backward(logp, z)[0]
    lb = np.repeat(logp[None, :, BLANK:BLANK + 1], len(z) + 1, axis=-1)
    le = logp[None][:, :, z] if len(z) else np.zeros((1, L, 0))
    ll, _, _ = lattice_forward_backward(lb, le, np.array([L]), np.array([len(z)]))
    return float(ll[0])


def emission_posteriors(logits: np.ndarray, sequence: str, collapse_repeats: bool = False) -> np.ndarray:
    """Per called base j: max over steps of Pr(base j emitted at that step)."""
    logp = log_softmax(logits)
    z = encode(sequence)
    L = logp.shape[0]
    if not len(z) or len(z) > L:
        return np.zeros(len(z))
    if collapse_repeats:
        _, _, gamma = collapse_forward_backward(logp, z)
        return gamma[:, 1::2].max(axis=0)
    lb = np.repeat(logp[None, :, BLANK:BLANK + 1], len(z) + 1, axis=-1)
    _, _, oe = lattice_forward_backward(lb, logp[None][:, :, z], np.array([L]), np.array([len(z)]))
    return oe[0].max(axis=0)


# ── decoding ──────────────────────────────────────────────────────────────────

def ctc_greedy_decode(logits: np.ndarray, collapse_repeats: bool = False) -> str:
    if len(logits) == 0:
        return ""
    return reduce_path(np.argmax(logits, axis=-1), collapse_repeats)


def _prune(beams: dict, width: int, score) -> dict:
    ranked = sorted(beams.items(), key=lambda kv: (-score(kv[1]), kv[0]))
    return dict(ranked[:width])


def _beam_plain(logp: np.ndarray, width: int) -> tuple[int, ...]:
    beams: dict[tuple[int, ...], float] = {(): 0.0}
    for step in logp:
        nxt: dict[tuple[int, ...], float] = {}
        for prefix, mass in beams.items():
            for c in range(N_CLASSES):
                key = prefix if c == BLANK else prefix + (c,)
                val = mass + step[c]
                nxt[key] = np.logaddexp(nxt[key], val) if key in nxt else val
        beams = _prune(nxt, width, lambda v: v)
    return max(beams.items(), key=lambda kv: (kv[1], tuple(-s for s in kv[0])))[0]


def _beam_collapse(logp: np.ndarray, width: int) -> tuple[int, ...]:
    # each prefix keeps (ending in blank, ending in its last label)
    beams: dict[tuple[int, ...], tuple[float, float]] = {(): (0.0, NEG_INF)}

    def add(store, key, pb=NEG_INF, pnb=NEG_INF):
        ob, onb = store.get(key, (NEG_INF, NEG_INF))
        store[key] = (np.logaddexp(ob, pb), np.logaddexp(onb, pnb))

    for step in logp:
        nxt: dict = {}
        for prefix, (pb, pnb) in beams.items():
            total = np.logaddexp(pb, pnb)
            add(nxt, prefix, pb=total + step[BLANK])
            for c in range(4):
                ext = prefix + (c,)
                if prefix and prefix[-1] == c:
                    add(nxt, ext, pnb=pb + step[c])
                    add(nxt, prefix, pnb=pnb + step[c])
                else:
                    add(nxt, ext, pnb=total + step[c])
        beams = _prune(nxt, width, lambda v: np.logaddexp(*v))
    return max(beams.items(), key=lambda kv: (np.logaddexp(*kv[1]), tuple(-s for s in kv[0])))[0]


def ctc_beam_decode(logits: np.ndarray, beam_width: int = 10, collapse_repeats: bool = False) -> str:
    """
    Prefix-merging beam search; ties rank lexicographically. The result is
    never less likely than the greedy call.
    """
    if len(logits) == 0:
        return ""
    logp = np.maximum(log_softmax(logits), LOG_FLOOR)
    best = decode(_beam_collapse(logp, beam_width) if collapse_repeats else _beam_plain(logp, beam_width))
    greedy = ctc_greedy_decode(logits, collapse_repeats)
    if greedy != best:
        if sequence_log_likelihood(logits, greedy, collapse_repeats) > sequence_log_likelihood(logits, best, collapse_repeats):
            return greedy
    return best

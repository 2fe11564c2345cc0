"""
Recurrent neural aligner head with a table-based context encoder.

For a prefix z_1..z_j of emitted bases, the step distribution is
    Q(h_i, z_{<=j}) = softmax(W[c] h_i + b[c] + start_bias[j] * [j < k])
where c indexes the last k bases (left-padded with 'A'). The likelihood of a
target sums over all blank placements with the same forward DP as CTC.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from src.autodiff.ops import apply_op, register_op
from src.autodiff.tensor import Tensor
from src.decoders.alphabet import BLANK, N_CLASSES, context_codes, context_encode, decode, encode
from src.decoders.ctc import LOG_FLOOR, log_softmax
from src.decoders.lattice import NEG_INF, lattice_forward_backward
from src.errors import ShapeError, UnalignableError
from src.nn.module import Module


def _step_logits(h, W, b, sb, codes, k):
    """Logits [L, len(codes), 5] for every (step, prefix length) pair."""
    logits = np.einsum("lh,jch->ljc", h, W[codes]) + b[codes][None]
    short = min(len(codes), k)
    logits[:, :short] += sb[:short][None]
    return logits


def _read_lattice(h, W, b, sb, z, k):
    codes = context_codes(z, k)
    logits = _step_logits(h.astype(np.float64), W.astype(np.float64), b.astype(np.float64),
                          sb.astype(np.float64), codes, k)
    logq = log_softmax(logits)
    M = len(z)
    lb = logq[None, :, :, BLANK]
    le = logq[:, np.arange(M), z][None] if M else np.zeros((1, h.shape[0], 0))
    ll, ob, oe = lattice_forward_backward(lb, le, np.array([h.shape[0]]), np.array([M]))
    return codes, logq, float(ll[0]), ob[0], oe[0]


@register_op("rna_nll")
def _rna_nll(h, W, b, sb, targets: tuple, in_lengths: np.ndarray, k: int = 6):
    B, L, H = h.shape
    if W.shape != (4 ** k, N_CLASSES, H):
        raise ShapeError("rna_nll.table", (4 ** k, N_CLASSES, H), W.shape)
    in_lengths = np.asarray(in_lengths, dtype=np.int64)
    saved = []
    nll = np.empty(B)
    for r in range(B):
        z = np.asarray(targets[r], dtype=np.int64)
        n = int(in_lengths[r])
        if len(z) > n:
            raise UnalignableError(n, len(z))
        codes, logq, ll, ob, oe = _read_lattice(h[r, :n], W, b, sb, z, k)
        if not np.isfinite(ll):
            raise UnalignableError(n, len(z))
        nll[r] = -ll
        saved.append((n, z, codes, logq, ob, oe))

    def backward(g):
        dh = np.zeros(h.shape)
        dW = np.zeros(W.shape)
        db = np.zeros(b.shape)
        dsb = np.zeros(sb.shape)
        for r, (n, z, codes, logq, ob, oe) in enumerate(saved):
            M = len(z)
            occ_emit = np.zeros_like(ob)
            occ_emit[:, :M] = oe
            dlogits = (ob + occ_emit)[..., None] * np.exp(logq)
            dlogits[..., BLANK] -= ob
            if M:
                dlogits[:, np.arange(M), z] -= oe
            dlogits *= float(g[r])
            Wc = W[codes].astype(np.float64)
            dh[r, :n] = np.einsum("ljc,jch->lh", dlogits, Wc)
            np.add.at(dW, codes, np.einsum("ljc,lh->jch", dlogits, h[r, :n].astype(np.float64)))
            np.add.at(db, codes, dlogits.sum(axis=0))
            short = min(M + 1, k)
            dsb[:short] += dlogits[:, :short].sum(axis=0)
        dt = h.dtype
        return dh.astype(dt), dW.astype(dt), db.astype(dt), dsb.astype(dt)

    return nll.astype(h.dtype), backward


class RNAHead(Module):
    """Context table (4^k entries of a 5xH matrix and bias) plus per-length start biases."""

    def __init__(self, features: int, rng: np.random.Generator, k: int = 6):
        super().__init__()
        self.k = k
        self.features = features
        W0 = rng.standard_normal((N_CLASSES, features)) / np.sqrt(features)
        self.W = self.add_param("table_weight", np.tile(W0[None], (4 ** k, 1, 1)))
        self.b = self.add_param("table_bias", np.zeros((4 ** k, N_CLASSES)))
        self.start_bias = self.add_param("start_bias", np.zeros((k, N_CLASSES)))

    def loss(self, h: Tensor, targets: Sequence[np.ndarray], in_lengths) -> Tensor:
        """Per-read negative log-likelihood [B]; h [B, L, H]."""
        return apply_op(
            "rna_nll", h, self.W.use(), self.b.use(), self.start_bias.use(),
            targets=tuple(targets), in_lengths=np.asarray(in_lengths), k=self.k,
        )

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.W.value.data, self.b.value.data, self.start_bias.value.data

    def step_distribution(self, h_i: np.ndarray, prefix: Sequence[int]) -> np.ndarray:
        W, b, sb = self.arrays()
        c = context_encode(prefix, self.k)
        logits = W[c].astype(np.float64) @ h_i + b[c]
        if len(prefix) < self.k:
            logits = logits + sb[len(prefix)]
        return np.exp(log_softmax(logits))


def rna_loss(h: np.ndarray, target: str, head: RNAHead) -> float:
    """Negative log-likelihood of one target for features h [L, H]."""
    z = encode(target)
    if len(z) > len(h):
        raise UnalignableError(len(h), len(z))
    W, b, sb = head.arrays()
    ll = _read_lattice(np.asarray(h), W, b, sb, z, head.k)[2]
    if not np.isfinite(ll):
        raise UnalignableError(len(h), len(z))
    return -ll


def rna_log_likelihood(h: np.ndarray, sequence: str, head: RNAHead) -> float:
    z = encode(sequence)
    if len(z) > len(h):
        return NEG_INF
    W, b, sb = head.arrays()
    return _read_lattice(np.asarray(h), W, b, sb, z, head.k)[2]


def rna_emission_posteriors(h: np.ndarray, sequence: str, head: RNAHead) -> np.ndarray:
    z = encode(sequence)
    if not len(z) or len(z) > len(h):
        return np.zeros(len(z))
    W, b, sb = head.arrays()
    oe = _read_lattice(np.asarray(h), W, b, sb, z, head.k)[4]
    return oe.max(axis=0)


def rna_beam_decode(h: np.ndarray, head: RNAHead, beam_width: int = 50) -> str:
    """Prefix-merging beam; each hypothesis looks up Q by its own last-k context."""
    W, b, sb = (np.asarray(a, dtype=np.float64) for a in head.arrays())
    k = head.k
    h = np.asarray(h, dtype=np.float64)
    beams: dict[tuple[int, ...], float] = {(): 0.0}
    for h_i in h:
        prefixes = list(beams)
        codes = np.array([context_encode(p, k) for p in prefixes], dtype=np.int64)
        logits = W[codes] @ h_i + b[codes]
        for n, p in enumerate(prefixes):
            if len(p) < k:
                logits[n] += sb[len(p)]
        logq = np.maximum(log_softmax(logits), LOG_FLOOR)
        nxt: dict[tuple[int, ...], float] = {}
        for n, p in enumerate(prefixes):
            mass = beams[p]
            for c in range(N_CLASSES):
                key = p if c == BLANK else p + (c,)
                val = mass + logq[n, c]
                nxt[key] = np.logaddexp(nxt[key], val) if key in nxt else val
        ranked = sorted(nxt.items(), key=lambda kv: (-kv[1], kv[0]))
        beams = dict(ranked[:beam_width])
    best = max(beams.items(), key=lambda kv: (kv[1], tuple(-s for s in kv[0])))[0]
    return decode(best)

"""Gradient-check cases for the CTC and RNA losses."""
from __future__ import annotations

import numpy as np

from src.autodiff.gradcheck import grad_case
from src.autodiff.ops import apply_op

_TARGETS = (np.array([0, 2, 1]), np.array([3, 3]))
_LENGTHS = np.array([6, 5])
RNA_K = 2
RNA_H = 3


@grad_case("ctc_loss", ("logits",), lambda rng: [rng.standard_normal((2, 6, 5))])
def _ctc(logits):
    return apply_op("ctc_nll", logits, targets=_TARGETS, in_lengths=_LENGTHS)


@grad_case("ctc_loss_collapse", ("logits",), lambda rng: [rng.standard_normal((2, 6, 5))])
def _ctc_collapse(logits):
    return apply_op("ctc_nll", logits, targets=_TARGETS, in_lengths=_LENGTHS, collapse_repeats=True)


def _rna_sample(rng):
    return [
        rng.standard_normal((2, 6, RNA_H)),
        rng.standard_normal((4 ** RNA_K, 5, RNA_H)),
        0.5 * rng.standard_normal((4 ** RNA_K, 5)),
        0.5 * rng.standard_normal((RNA_K, 5)),
    ]


@grad_case("rna_loss", ("h", "table_weight", "table_bias", "start_bias"), _rna_sample)
def _rna(h, W, b, sb):
    return apply_op("rna_nll", h, W, b, sb, targets=_TARGETS, in_lengths=_LENGTHS, k=RNA_K)

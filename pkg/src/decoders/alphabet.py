"""
The blank-extended DNA alphabet and the reduction R from step labels to bases.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

BASES = "ACGT"
BLANK = 4
N_CLASSES = 5
SYMBOLS = BASES + "-"  # "-" renders the blank
_INDEX = {b: i for i, b in enumerate(BASES)}


def encode(sequence: str) -> np.ndarray:
    try:
        return np.array([_INDEX[b] for b in sequence], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"unexpected base {exc.args[0]!r}; sequences use {BASES}") from None


def decode(labels: Iterable[int]) -> str:
    return "".join(BASES[int(i)] for i in labels)


def reduce_path(path: Sequence[int], collapse_repeats: bool = False) -> str:
    """R: drop blanks; with collapse_repeats, merge runs of equal labels first."""
    out = []
    prev = None
    for label in path:
        label = int(label)
        if collapse_repeats and label == prev:
            continue
        prev = label
        if label != BLANK:
            out.append(BASES[label])
    return "".join(out)


def context_encode(prefix: Sequence[int] | str, k: int = 6) -> int:
    """
    Table index of the last min(len, k) emitted bases, left-padded with 'A'
    (code 0); the first symbol is the most significant base-4 digit.
    """
    if isinstance(prefix, str):
        prefix = encode(prefix)
    tail = list(prefix[-k:]) if k else []
    code = 0
    for sym in [0] * (k - len(tail)) + [int(s) for s in tail]:
        code = code * 4 + sym
    return code


def context_codes(target: Sequence[int], k: int) -> np.ndarray:
    """Context index for every prefix z[:j], j = 0..len(target)."""
    codes = np.zeros(len(target) + 1, dtype=np.int64)
    mask = 4 ** k
    code = 0
    for j, sym in enumerate(target, start=1):
        code = (code * 4 + int(sym)) % mask
        codes[j] = code
    return codes

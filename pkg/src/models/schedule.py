"""
Learning-rate schedule: linear warmup, then cosine annealing with warm restarts
whose cycle lengths grow geometrically.
"""
from __future__ import annotations

import math

from src.config import ScheduleSpec


def cycle_of(step: int, spec: ScheduleSpec) -> tuple[int, int, int]:
    """(cycle index, position inside the cycle, cycle length) for a post-warmup step.

    Steps past the last configured cycle stay in the last cycle, pinned to its end.
    """
    t = step - spec.warmup_batches
    lengths = spec.cycle_lengths()
    for c, n in enumerate(lengths):
        if t < n:
            return c, t, n
        t -= n
    return len(lengths) - 1, lengths[-1], lengths[-1]


def lr_at(step: int, spec: ScheduleSpec) -> float:
    if step < 0:
        raise ValueError(f"step must be non-negative, got {step}")
    if step < spec.warmup_batches:
        return spec.max_lr * step / spec.warmup_batches
    _, pos, n = cycle_of(step, spec)
    return 0.5 * spec.max_lr * (1.0 + math.cos(math.pi * pos / n))


def cycle_ends(spec: ScheduleSpec) -> list[int]:
    """Last step of every cycle (checkpoint points)."""
    ends = []
    at = spec.warmup_batches
    for n in spec.cycle_lengths():
        at += n
        ends.append(at - 1)
    return ends

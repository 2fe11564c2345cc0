"""
Fixed-length training chunks cut at event boundaries, and shuffled batching.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from src.data.siggen import ReadRecord
from src.decoders.alphabet import encode


@dataclass
class Chunk:
    read_id: str
    signal: np.ndarray   # float32 [chunk_signals]
    target: np.ndarray   # base codes whose events lie inside the chunk
    speed: float


def cut_chunks(record: ReadRecord, chunk_signals: int) -> list[Chunk]:
    """Consecutive chunks, each starting at an event start; bases must end inside the chunk."""
    bounds = record.event_bounds.astype(np.int64)
    ends = np.append(bounds[1:], record.n_signals)
    codes = encode(record.sequence)
    chunks = []
    first = 0
    while first < len(bounds):
        start = int(bounds[first])
        stop = start + chunk_signals
        if stop > record.n_signals:
            break
        inside = np.nonzero((bounds >= start) & (ends <= stop))[0]
        chunks.append(Chunk(record.read_id, record.signal[start:stop], codes[inside], record.speed))
        nxt = np.searchsorted(bounds, stop, side="left")
        if nxt <= first:
            break
        first = int(nxt)
    return chunks


@dataclass
class Batch:
    signal: np.ndarray          # [B, T, 1]
    targets: list[np.ndarray]
    read_ids: list[str]


def make_batch(chunks: Sequence[Chunk]) -> Batch:
    signal = np.stack([c.signal for c in chunks])[..., None].astype(np.float32)
    return Batch(signal, [c.target for c in chunks], [c.read_id for c in chunks])


def iterate_batches(chunks: Sequence[Chunk], batch_size: int, rng: np.random.Generator) -> Iterator[Batch]:
    """Endless shuffled epochs; the trailing partial batch of each epoch is dropped."""
    if len(chunks) < batch_size:
        raise ValueError(f"only {len(chunks)} training chunks for batch size {batch_size}")
    while True:
        order = rng.permutation(len(chunks))
        for s in range(0, len(order) - batch_size + 1, batch_size):
            yield make_batch([chunks[i] for i in order[s:s + batch_size]])

"""
Tabular exports of pooling traces: one summary row per read, and per-read
(signal index -> pooled position) curves for the within-read speed plots.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from src.dynpool.pooling import PoolingTrace

SUMMARY_COLUMNS = ["read_id", "T", "output_length", "mean_length_factor"]


def summary_frame(traces: Iterable[PoolingTrace]) -> pd.DataFrame:
    rows = [
        {
            "read_id": t.read_id,
            "T": int(len(t.positions)),
            "output_length": int(t.output_length),
            "mean_length_factor": float(t.mean_length_factor),
        }
        for t in traces
    ]
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def positions_frame(traces: Sequence[PoolingTrace], every: int = 1) -> pd.DataFrame:
    """Long-format curves: read_id, signal_index, pooled_position (sampled every `every` points)."""
    frames = []
    for t in traces:
        idx = np.arange(0, len(t.positions), max(every, 1))
        frames.append(pd.DataFrame({
            "read_id": t.read_id,
            "signal_index": idx,
            "pooled_position": t.pooled_positions[idx],
        }))
    if not frames:
        return pd.DataFrame(columns=["read_id", "signal_index", "pooled_position"])
    return pd.concat(frames, ignore_index=True)


def write_tsv(frame: pd.DataFrame, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", index=False, float_format="%.6f", lineterminator="\n")
    return path

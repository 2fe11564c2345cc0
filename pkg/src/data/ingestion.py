"""
Loading of generated read datasets.
A dataset directory holds meta.json and one length-prefixed record file per split.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import pandas as pd

from src.data.dataset import SPLIT_SUFFIX, SPLITS, decode_records
from src.data.siggen import ReadRecord

# ──────────────────────────────────────────────────────────────────────────────
# Helpers
# ──────────────────────────────────────────────────────────────────────────────

def _resolve(data_dir: Path | str) -> Path:
    path = Path(data_dir)
    if not (path / "meta.json").exists():
        raise FileNotFoundError(f"no dataset at {path} (meta.json missing)")
    return path


# ──────────────────────────────────────────────────────────────────────────────
# Loaders
# ──────────────────────────────────────────────────────────────────────────────

def load_meta(data_dir: Path | str) -> dict:
    """meta.json – generator config, seed and split sizes."""
    with open(_resolve(data_dir) / "meta.json", encoding="utf-8") as fp:
        return json.load(fp)


def load_split(split: str, data_dir: Path | str, limit: Optional[int] = None) -> list[ReadRecord]:
    """Records of one split ('train', 'valid' or 'test'), in file order."""
    if split not in SPLITS:
        raise ValueError(f"unknown split '{split}'; expected one of {SPLITS}")
    path = _resolve(data_dir) / f"{split}{SPLIT_SUFFIX}"
    if not path.exists():
        raise FileNotFoundError(path)
    records = decode_records(path.read_bytes())
    return records[:limit] if limit is not None else records


def reads_frame(records: list[ReadRecord]) -> pd.DataFrame:
    """One row per read: read_id, n_bases, n_signals, speed, mean_event_length."""
    rows = [
        dict(
            read_id=r.read_id,
            n_bases=len(r.sequence),
            n_signals=r.n_signals,
            speed=float(r.speed),
            mean_event_length=float(r.n_signals / max(len(r.sequence), 1)),
        )
        for r in records
    ]
    return pd.DataFrame(rows, columns=["read_id", "n_bases", "n_signals", "speed", "mean_event_length"])


# ──────────────────────────────────────────────────────────────────────────────
# Master loader
# ──────────────────────────────────────────────────────────────────────────────

def load_all(data_dir: Path | str) -> dict[str, list[ReadRecord]]:
    """Return every split keyed by name."""
    return {split: load_split(split, data_dir) for split in SPLITS}


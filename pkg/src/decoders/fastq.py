"""FASTQ records with per-base qualities Q = -10 log10(1 - p), clipped to [0, 40], Phred+33."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

MAX_Q = 40


def phred_string(posteriors: np.ndarray) -> str:
    p = np.clip(np.asarray(posteriors, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        q = -10.0 * np.log10(1.0 - p)
    q = np.clip(np.nan_to_num(q, posinf=MAX_Q), 0, MAX_Q)
    return "".join(chr(33 + int(round(v))) for v in q)


@dataclass
class FastqRecord:
    read_id: str
    sequence: str
    quality: str

    def __post_init__(self):
        if len(self.sequence) != len(self.quality):
            raise ValueError(f"{self.read_id}: sequence and quality lengths differ")

    def format(self) -> str:
        return f"@{self.read_id}\n{self.sequence}\n+\n{self.quality}\n"


def write_fastq(records: Iterable[FastqRecord], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        for rec in records:
            fp.write(rec.format())
    return path


def read_fastq(path: Path | str) -> list[FastqRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    records = []
    for i in range(0, len(lines) - 3, 4):
        records.append(FastqRecord(lines[i][1:], lines[i + 1], lines[i + 3]))
    return records

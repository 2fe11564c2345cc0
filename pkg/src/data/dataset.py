"""
Dataset directories: meta.json plus one binary file per split.

Each record is a sequence of u32-length-prefixed little-endian fields:
read_id (UTF-8) | sequence (ASCII) | speed (f32) | event_bounds (u32[]) | signal (f32[]).
"""
from __future__ import annotations

import json
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from src.config import GeneratorConfig
from src.data.siggen import PoreModel, ReadRecord, generate_read
from src.errors import ConfigError

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
SPLIT_SUFFIX = ".reads"
FORMAT = "dpr1"


# ──────────────────────────────────────────────────────────────────────────────
# Record codec
# ──────────────────────────────────────────────────────────────────────────────

def _field(payload: bytes) -> bytes:
    return struct.pack("<I", len(payload)) + payload


def encode_record(rec: ReadRecord) -> bytes:
    return b"".join([
        _field(rec.read_id.encode("utf-8")),
        _field(rec.sequence.encode("ascii")),
        _field(struct.pack("<f", rec.speed)),
        _field(np.asarray(rec.event_bounds, dtype="<u4").tobytes()),
        _field(np.asarray(rec.signal, dtype="<f4").tobytes()),
    ])


def decode_records(blob: bytes) -> list[ReadRecord]:
    records = []
    offset = 0
    fields: list[bytes] = []
    while offset < len(blob):
        if offset + 4 > len(blob):
            raise ValueError("truncated record length prefix")
        (n,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + n > len(blob):
            raise ValueError("truncated record field")
        fields.append(blob[offset:offset + n])
        offset += n
        if len(fields) == 5:
            rid, seq, speed, bounds, signal = fields
            records.append(ReadRecord(
                read_id=rid.decode("utf-8"),
                sequence=seq.decode("ascii"),
                speed=struct.unpack("<f", speed)[0],
                event_bounds=np.frombuffer(bounds, dtype="<u4").astype(np.uint32),
                signal=np.frombuffer(signal, dtype="<f4").astype(np.float32),
            ))
            fields = []
    if fields:
        raise ValueError("dangling fields after last record")
    return records


def write_split(records: Iterable[ReadRecord], path: Path) -> Path:
    path.write_bytes(b"".join(encode_record(r) for r in records))
    return path


# ──────────────────────────────────────────────────────────────────────────────
# Generation
# ──────────────────────────────────────────────────────────────────────────────

def split_counts(n_reads: int, fractions: tuple[float, float, float]) -> dict[str, int]:
    n_train = int(round(n_reads * fractions[0]))
    n_valid = min(int(round(n_reads * fractions[1])), n_reads - n_train)
    return {"train": n_train, "valid": n_valid, "test": n_reads - n_train - n_valid}


def read_id_for(seed: int, index: int) -> str:
    return f"read_{seed}_{index:06d}"


def generate_dataset(
    seed: int,
    n_reads: int,
    out_dir: Path | str,
    config: Optional[GeneratorConfig] = None,
    threads: int = 1,
) -> Path:
    """Write a deterministic dataset; read i uses seed ^ i and splits go by index."""
    if n_reads < 1:
        raise ConfigError("reads", f"need at least one read, got {n_reads}")
    config = config or GeneratorConfig()
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        raise FileExistsError(f"output directory {out_dir} already exists and is not empty")
    out_dir.mkdir(parents=True, exist_ok=True)

    pore = PoreModel.from_config(config)

    def make(index: int) -> ReadRecord:
        return generate_read(seed ^ index, config=config, pore=pore, read_id=read_id_for(seed, index))

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        records = list(pool.map(make, range(n_reads)))

    counts = split_counts(n_reads, config.split)
    start = 0
    for split in SPLITS:
        write_split(records[start:start + counts[split]], out_dir / f"{split}{SPLIT_SUFFIX}")
        start += counts[split]

    meta = {
        "format": FORMAT,
        "seed": seed,
        "n_reads": n_reads,
        "splits": counts,
        "generator": config.model_dump(mode="json"),
        "synthetic": True,
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("dataset written to %s: %s", out_dir, counts)
    return out_dir

"""
DPK1 checkpoint container.

Layout: b"DPK1" | u32 little-endian header length | UTF-8 JSON header
{"tensors": [{"name", "dtype": "f32", "shape"}...], "meta": {...}} |
little-endian row-major float32 payloads in header order.
"""
from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from src.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"DPK1"


def encode_checkpoint(tensors: Mapping[str, np.ndarray], meta: Optional[Mapping[str, Any]] = None) -> bytes:
    entries = []
    payloads = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(np.asarray(arr, dtype="<f4"))
        entries.append({"name": name, "dtype": "f32", "shape": list(arr.shape)})
        payloads.append(arr.tobytes(order="C"))
    header = json.dumps(
        {"tensors": entries, "meta": dict(meta or {})}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    return MAGIC + struct.pack("<I", len(header)) + header + b"".join(payloads)


def decode_checkpoint(blob: bytes) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise CheckpointError("not a DPK1 checkpoint (bad magic)")
    (hlen,) = struct.unpack("<I", blob[4:8])
    if 8 + hlen > len(blob):
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(blob[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None

    offset = 8 + hlen
    tensors: dict[str, np.ndarray] = {}
    for entry in header.get("tensors", []):
        if entry.get("dtype") != "f32":
            raise CheckpointError(f"unsupported dtype {entry.get('dtype')!r} for {entry.get('name')}")
        shape = tuple(int(s) for s in entry["shape"])
        nbytes = 4 * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(blob):
            raise CheckpointError(f"truncated payload for tensor {entry['name']}")
        arr = np.frombuffer(blob, dtype="<f4", count=nbytes // 4, offset=offset).reshape(shape)
        tensors[entry["name"]] = arr.astype(np.float32)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{len(blob) - offset} trailing bytes after last tensor")
    return tensors, header.get("meta", {})


def save_checkpoint(path: Path | str, tensors: Mapping[str, np.ndarray], meta: Optional[Mapping[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors, meta))
    logger.info("checkpoint written: %s (%d tensors)", path, len(tensors))
    return path


def load_checkpoint(path: Path | str) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return decode_checkpoint(path.read_bytes())

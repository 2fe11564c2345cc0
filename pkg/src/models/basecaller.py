"""
Batch base calling from a checkpoint: FASTQ calls with posterior qualities,
pooling traces for dynamic-pooling models and a throughput record.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

import numpy as np

from src.autodiff.checkpoint import load_checkpoint
from src.autodiff.tensor import Tensor
from src.config import ModelConfig
from src.data.ingestion import load_split
from src.data.siggen import ReadRecord
from src.decoders.ctc import ctc_beam_decode, ctc_greedy_decode, emission_posteriors
from src.decoders.fastq import FastqRecord, phred_string, write_fastq
from src.decoders.rna import rna_beam_decode, rna_emission_posteriors
from src.dynpool.pooling import PoolingTrace
from src.dynpool.trace import positions_frame, summary_frame, write_tsv
from src.errors import CheckpointError
from src.models.network import BasecallerNet

logger = logging.getLogger(__name__)

CALLS_NAME = "calls.fastq"


@dataclass
class CallResult:
    record: FastqRecord
    n_signals: int
    trace: Optional[PoolingTrace]


def load_model(checkpoint: Path | str, config: Optional[ModelConfig] = None) -> BasecallerNet:
    """Rebuild the network from checkpoint metadata (or an explicit config) and load its tensors."""
    tensors, meta = load_checkpoint(checkpoint)
    if config is None:
        if "model" not in meta:
            raise CheckpointError("checkpoint carries no model config; pass one explicitly")
        config = ModelConfig.model_validate(meta["model"])
    model = BasecallerNet(config)
    try:
        model.load_state_dict(tensors)
    except CheckpointError as exc:
        logger.error("checkpoint %s does not fit %s: %s", checkpoint, config.name, exc)
        raise
    return model.eval()


def call_read(model: BasecallerNet, record_signal: np.ndarray, read_id: str, beam_width: int = 1):
    """Decode one read in inference mode; returns (sequence, features [L, K], trace or None)."""
    if len(record_signal) == 0:
        return "", np.zeros((0, 0), dtype=np.float32), None
    out = model(Tensor(np.asarray(record_signal, dtype=np.float32)[None, :, None]), read_ids=[read_id])
    n = int(out.lengths[0])
    features = out.features.data[0, :n]
    trace = out.traces[0] if out.traces else None
    if model.rna is not None:
        return rna_beam_decode(features, model.rna, beam_width=beam_width), features, trace
    if beam_width > 1:
        return ctc_beam_decode(features, beam_width, model.config.head.collapse_repeats), features, trace
    return ctc_greedy_decode(features, model.config.head.collapse_repeats), features, trace


def call_one(model: BasecallerNet, signal: np.ndarray, read_id: str, beam_width: int = 1) -> CallResult:
    sequence, features, trace = call_read(model, signal, read_id, beam_width)
    if not sequence:
        if len(signal):
            logger.warning("empty call for %s", read_id)
        return CallResult(FastqRecord(read_id, "", ""), int(len(signal)), trace)
    if model.rna is not None:
        posteriors = rna_emission_posteriors(features, sequence, model.rna)
    else:
        posteriors = emission_posteriors(features, sequence, model.config.head.collapse_repeats)
    return CallResult(FastqRecord(read_id, sequence, phred_string(posteriors)), int(len(signal)), trace)


def basecall_records(
    model: BasecallerNet,
    records: list[ReadRecord],
    decoder: Literal["greedy", "beam"] = "greedy",
    beam_width: Optional[int] = None,
    threads: int = 1,
) -> list[CallResult]:
    """Call reads in input order; output does not depend on the thread count."""
    width = 1 if decoder == "greedy" else (beam_width or model.config.head.beam_width)
    model.eval()
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        return list(pool.map(lambda rec: call_one(model, rec.signal, rec.read_id, width), records))


def basecall(
    checkpoint: Path | str,
    data_dir: Path | str,
    out_dir: Path | str,
    split: str = "test",
    decoder: Literal["greedy", "beam"] = "greedy",
    beam_width: Optional[int] = None,
    threads: int = 1,
    limit: Optional[int] = None,
    config: Optional[ModelConfig] = None,
) -> dict:
    model = load_model(checkpoint, config)
    records = load_split(split, data_dir, limit)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    results = basecall_records(model, records, decoder, beam_width, threads)
    seconds = time.perf_counter() - started

    write_fastq([r.record for r in results], out_dir / CALLS_NAME)
    outputs = {"calls": str(out_dir / CALLS_NAME)}
    traces = [r.trace for r in results if r.trace is not None]
    if model.config.uses_dynpool:
        outputs["pooling_summary"] = str(write_tsv(summary_frame(traces), out_dir / "pooling_summary.tsv"))
        outputs["pooling_positions"] = str(write_tsv(positions_frame(traces), out_dir / "pooling_positions.tsv"))

    signals = int(sum(r.n_signals for r in results))
    throughput = {
        "model": model.config.name,
        "decoder": decoder,
        "reads": len(results),
        "signals": signals,
        "seconds": seconds,
        "signals_per_s": signals / seconds if seconds > 0 else None,
        "threads": threads,
        "signals_per_s_per_thread": signals / seconds / max(threads, 1) if seconds > 0 else None,
    }
    (out_dir / "throughput.json").write_text(json.dumps(throughput, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("called %d reads (%d signals) in %.2fs", len(results), signals, seconds)
    outputs["throughput"] = str(out_dir / "throughput.json")
    return {"reads": len(results), "empty_calls": sum(not r.record.sequence for r in results),
            "throughput": throughput, "outputs": outputs}

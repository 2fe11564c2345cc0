"""
Training loop: chunked batches, AdamW under the warm-restart schedule,
JSON-lines log, a checkpoint at the end of every cycle and cycle-end validation.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from src.autodiff.checkpoint import save_checkpoint
from src.autodiff.ops import apply_op, batch_take
from src.autodiff.tape import Tape, backward
from src.autodiff.tensor import Tensor
from src.config import ModelConfig, TrainConfig
from src.data.chunks import Batch, Chunk, cut_chunks, iterate_batches, make_batch
from src.data.ingestion import load_split
from src.data.siggen import ReadRecord
from src.errors import NonFiniteError, TrainingDivergedError
from src.models.basecaller import call_read
from src.models.evaluation import align
from src.models.network import BasecallerNet
from src.models.optimizer import AdamW
from src.models.schedule import cycle_ends, lr_at

logger = logging.getLogger(__name__)

LOG_NAME = "train_log.jsonl"
FINAL_CHECKPOINT = "model.dpk"


@dataclass
class StepResult:
    loss: float
    batch_mean_length_factor: float
    skipped_reads: int


def checkpoint_meta(model: BasecallerNet, step: int, cycle: Optional[int], train: TrainConfig) -> dict:
    return {
        "model": model.config.model_dump(mode="json"),
        "train": train.model_dump(mode="json"),
        "step": step,
        "cycle": cycle,
    }


def _mean_length_factor(model: BasecallerNet, traces) -> float:
    if traces:
        return float(np.mean([t.mean_length_factor for t in traces]))
    return 1.0 / model.config.pool.stride


def batch_loss(model: BasecallerNet, batch: Batch) -> tuple[Optional[Tensor], float, int]:
    """Per-base loss over the alignable reads of a batch (None when no read is alignable)."""
    out = model(Tensor(batch.signal), read_ids=batch.read_ids)
    keep = [b for b, z in enumerate(batch.targets) if len(z) <= out.lengths[b]]
    skipped = len(batch.targets) - len(keep)
    if skipped:
        dropped = [rid for b, rid in enumerate(batch.read_ids) if b not in keep]
        logger.warning("skipping %d unalignable chunk(s) from %s", skipped, ", ".join(dropped))
    factor = _mean_length_factor(model, out.traces)
    if not keep:
        return None, factor, skipped
    features = out.features if not skipped else batch_take(out.features, keep)
    targets = [batch.targets[b] for b in keep]
    nll = model.loss(features, targets, out.lengths[keep])
    n_bases = max(sum(len(z) for z in targets), 1)
    return apply_op("scale", nll.sum(), factor=1.0 / n_bases), factor, skipped


def train_step(model: BasecallerNet, optimizer: AdamW, batch: Batch, lr: float) -> Optional[StepResult]:
    model.train()
    optimizer.zero_grad()
    with Tape() as tape:
        loss, factor, skipped = batch_loss(model, batch)
    if loss is None:
        return None
    backward(loss, tape)
    optimizer.step(lr)
    return StepResult(loss.item(), factor, skipped)


def heldout_loss(model: BasecallerNet, chunks: list[Chunk], batch_size: int) -> Optional[float]:
    """Mean per-base loss on held-out chunks in inference mode."""
    model.eval()
    total, bases = 0.0, 0
    for s in range(0, len(chunks), batch_size):
        batch = make_batch(chunks[s:s + batch_size])
        out = model(Tensor(batch.signal), read_ids=batch.read_ids)
        keep = [b for b, z in enumerate(batch.targets) if len(z) <= out.lengths[b]]
        if not keep:
            continue
        targets = [batch.targets[b] for b in keep]
        features = out.features if len(keep) == len(batch.targets) else batch_take(out.features, keep)
        total += float(model.loss(features, targets, out.lengths[keep]).data.sum())
        bases += sum(len(z) for z in targets)
    model.train()
    return total / bases if bases else None


def validation_accuracy(model: BasecallerNet, records: list[ReadRecord]) -> Optional[float]:
    """Median greedy-decode accuracy over the given reads."""
    if not records:
        return None
    model.eval()
    accs = []
    for rec in records:
        call, _, _ = call_read(model, rec.signal, rec.read_id)
        accs.append(align(call, rec.sequence).accuracy if call else 0.0)
    model.train()
    return float(np.median(accs))


def _write(log, record: dict) -> None:
    log.write(json.dumps(record, sort_keys=True) + "\n")
    log.flush()


def train(
    model_config: ModelConfig,
    data_dir: Path | str,
    out_dir: Path | str,
    train_config: Optional[TrainConfig] = None,
) -> dict:
    """
    Train from scratch and write `train_log.jsonl`, one checkpoint per cycle end
    (`cycle{c}.dpk`) and `model.dpk` (the latest cycle end).
    """
    cfg = train_config or TrainConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_records = load_split("train", data_dir)
    valid_records = load_split("valid", data_dir)
    chunks = [c for rec in train_records for c in cut_chunks(rec, cfg.chunk_signals)]
    valid_chunks = [c for rec in valid_records for c in cut_chunks(rec, cfg.chunk_signals)]
    logger.info(
        "training %s on %d chunks (%d reads), budget %d batches",
        model_config.name, len(chunks), len(train_records), cfg.budget,
    )

    rng = np.random.default_rng(cfg.seed)
    model = BasecallerNet(model_config, seed=cfg.seed)
    optimizer = AdamW(model.parameters(), cfg.weight_decay, cfg.betas, cfg.eps)
    batches = iterate_batches(chunks, cfg.batch_size, rng)
    ends = {step: c for c, step in enumerate(cycle_ends(cfg.schedule))}
    budget = cfg.budget
    last_checkpoint: Optional[Path] = None
    initial_loss = heldout_loss(model, valid_chunks, cfg.batch_size)
    final_loss = initial_loss
    cycles_done = []

    with open(out_dir / LOG_NAME, "w", encoding="utf-8", newline="\n") as log:
        _write(log, {"event": "start", "model": model_config.name, "parameters": model.n_parameters(),
                     "budget": budget, "valid_loss": initial_loss})
        for step in range(budget):
            lr = lr_at(step, cfg.schedule)
            batch = next(batches)
            started = time.perf_counter()
            try:
                result = train_step(model, optimizer, batch, lr)
            except NonFiniteError as exc:
                logger.error("step %d: %s", step, exc)
                _write(log, {"event": "diverged", "step": step, "detail": str(exc)})
                raise TrainingDivergedError(step, str(last_checkpoint) if last_checkpoint else None) from exc
            wall_ms = (time.perf_counter() - started) * 1000.0
            if result is None:
                _write(log, {"event": "skipped", "step": step})
            else:
                _write(log, {
                    "step": step,
                    "lr": lr,
                    "loss": result.loss,
                    "batch_mean_length_factor": result.batch_mean_length_factor,
                    "skipped_reads": result.skipped_reads,
                    "wall_ms": round(wall_ms, 3),
                })
                if step % cfg.log_every == 0:
                    logger.info("step %d lr=%.2e loss=%.4f", step, lr, result.loss)

            last = step == budget - 1
            if step in ends or last:
                cycle = ends.get(step)
                final_loss = heldout_loss(model, valid_chunks, cfg.batch_size)
                accuracy = validation_accuracy(model, valid_records[: cfg.valid_reads])
                meta = checkpoint_meta(model, step, cycle, cfg)
                if cycle is not None:
                    save_checkpoint(out_dir / f"cycle{cycle}.dpk", model.state_dict(), meta)
                last_checkpoint = save_checkpoint(out_dir / FINAL_CHECKPOINT, model.state_dict(), meta)
                _write(log, {"event": "cycle_end", "step": step, "cycle": cycle,
                             "valid_loss": final_loss, "valid_median_accuracy": accuracy})
                cycles_done.append({"step": step, "cycle": cycle, "valid_median_accuracy": accuracy})
                logger.info("checkpoint at step %d (cycle %s): valid accuracy %s", step, cycle, accuracy)

    return {
        "model": model_config.name,
        "checkpoint": str(last_checkpoint) if last_checkpoint else None,
        "log": str(out_dir / LOG_NAME),
        "initial_valid_loss": initial_loss,
        "final_valid_loss": final_loss,
        "cycles": cycles_done,
    }

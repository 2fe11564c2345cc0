"""
File-level workflows: scoring a basecall directory against its dataset, and the
fixed-stride vs dynamic-pooling ablation of one preset family.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.config import TrainConfig, load_preset
from src.data.ingestion import load_split
from src.decoders.fastq import read_fastq
from src.models.basecaller import basecall
from src.models.evaluation import EvalReport, evaluate, write_report
from src.models.trainer import train

logger = logging.getLogger(__name__)

FAMILIES = ("heron-mini", "osprey-mini")


def evaluate_calls(
    calls_path: Path | str,
    data_dir: Path | str,
    split: str = "test",
    traces_path: Optional[Path | str] = None,
    out_dir: Optional[Path | str] = None,
) -> EvalReport:
    """Score a FASTQ of calls against the dataset split it was called from."""
    calls_path = Path(calls_path)
    if not calls_path.exists():
        raise FileNotFoundError(calls_path)
    calls = {rec.read_id: rec.sequence for rec in read_fastq(calls_path)}
    records = load_split(split, data_dir)
    references = {r.read_id: r.sequence for r in records}
    speeds = {r.read_id: r.speed for r in records}

    length_factors = None
    if traces_path is not None and Path(traces_path).exists():
        summary = pd.read_csv(traces_path, sep="\t")
        length_factors = dict(zip(summary["read_id"].astype(str), summary["mean_length_factor"]))

    report = evaluate(calls, references, speeds, length_factors)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def _train_and_score(preset: str, data_dir: Path, out_dir: Path, train_config: TrainConfig, threads: int) -> dict:
    model_config = load_preset(preset)
    run = train(model_config, data_dir, out_dir / "train", train_config)
    called = basecall(run["checkpoint"], data_dir, out_dir / "basecall", split="test", threads=threads)
    traces = called["outputs"].get("pooling_summary")
    report = evaluate_calls(called["outputs"]["calls"], data_dir, "test", traces, out_dir / "eval")
    return {
        "preset": preset,
        "median_accuracy": report.median_accuracy,
        "speed_fit": report.speed_fit,
        "signals_per_s": called["throughput"]["signals_per_s"],
    }


def run_ablation(
    family: str,
    data_dir: Path | str,
    out_dir: Path | str,
    seeds: Sequence[int] = (0, 1, 2),
    train_config: Optional[TrainConfig] = None,
    threads: int = 1,
) -> dict:
    """Train `family` and `family-dynpool` per seed under one budget and compare test medians."""
    if family not in FAMILIES:
        raise ValueError(f"unknown preset family '{family}'; expected one of {FAMILIES}")
    base = train_config or TrainConfig()
    data_dir, out_dir = Path(data_dir), Path(out_dir)
    rows = []
    for seed in seeds:
        cfg = base.model_copy(update={"seed": seed})
        fixed = _train_and_score(family, data_dir, out_dir / f"seed{seed}" / "fixed", cfg, threads)
        dynamic = _train_and_score(f"{family}-dynpool", data_dir, out_dir / f"seed{seed}" / "dynpool", cfg, threads)
        diff_pp = 100.0 * (dynamic["median_accuracy"] - fixed["median_accuracy"])
        logger.info("seed %d: fixed %.4f, dynpool %.4f (%+.2f pp)", seed,
                    fixed["median_accuracy"], dynamic["median_accuracy"], diff_pp)
        rows.append({
            "seed": seed,
            "fixed_median_accuracy": fixed["median_accuracy"],
            "dynpool_median_accuracy": dynamic["median_accuracy"],
            "difference_pp": diff_pp,
            "dynpool_r2": (dynamic["speed_fit"] or {}).get("r2"),
            "fixed_signals_per_s": fixed["signals_per_s"],
            "dynpool_signals_per_s": dynamic["signals_per_s"],
        })

    diffs = np.array([r["difference_pp"] for r in rows])
    summary = {
        "family": family,
        "seeds": list(seeds),
        "runs": rows,
        "dynpool_wins": int((diffs >= 0).sum()),
        "worst_difference_pp": float(diffs.min()) if len(diffs) else None,
        "synthetic": True,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary

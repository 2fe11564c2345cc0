"""
Read accuracy by exact global alignment, and the pooling-factor vs speed fit.

Alignment is Needleman-Wunsch with unit costs (match 0, mismatch 1, indel 1);
accuracy = matches / alignment columns. A dataset is summarized by its median.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

logger = logging.getLogger(__name__)

PER_READ_COLUMNS = [
    "read_id", "accuracy", "matches", "mismatches", "insertions", "deletions",
    "call_length", "reference_length", "speed", "mean_length_factor", "empty_call",
]


# ──────────────────────────────────────────────────────────────────────────────
# Alignment
# ──────────────────────────────────────────────────────────────────────────────

@dataclass
class Alignment:
    matches: int
    mismatches: int
    insertions: int   # bases in the call absent from the reference
    deletions: int    # reference bases missing from the call

    @property
    def columns(self) -> int:
        return self.matches + self.mismatches + self.insertions + self.deletions

    @property
    def distance(self) -> int:
        return self.mismatches + self.insertions + self.deletions

    @property
    def accuracy(self) -> float:
        return self.matches / self.columns if self.columns else 0.0


def _cost_matrix(call: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """D[i, j] = edit distance between call[:i] and ref[:j]; rows filled one at a time."""
    n, m = len(call), len(ref)
    D = np.empty((n + 1, m + 1), dtype=np.int64)
    D[0] = np.arange(m + 1)
    steps = np.arange(m + 1)
    for i in range(1, n + 1):
        diag = D[i - 1, :-1] + (ref != call[i - 1])
        best = np.empty(m + 1, dtype=np.int64)
        best[0] = i
        best[1:] = np.minimum(diag, D[i - 1, 1:] + 1)
        # horizontal moves: D[i, j] = min_k best[k] + (j - k)
        D[i] = np.minimum.accumulate(best - steps) + steps
    return D


def align(call: str, reference: str) -> Alignment:
    c = np.frombuffer(call.encode("ascii"), dtype=np.uint8)
    r = np.frombuffer(reference.encode("ascii"), dtype=np.uint8)
    D = _cost_matrix(c, r)
    i, j = len(c), len(r)
    counts = dict(matches=0, mismatches=0, insertions=0, deletions=0)
    # traceback preference: diagonal, then deletion, then insertion
    while i > 0 or j > 0:
        if i > 0 and j > 0 and D[i, j] == D[i - 1, j - 1] + (c[i - 1] != r[j - 1]):
            counts["matches" if c[i - 1] == r[j - 1] else "mismatches"] += 1
            i, j = i - 1, j - 1
        elif j > 0 and D[i, j] == D[i, j - 1] + 1:
            counts["deletions"] += 1
            j -= 1
        else:
            counts["insertions"] += 1
            i -= 1
    return Alignment(**counts)


def edit_distance(call: str, reference: str) -> int:
    c = np.frombuffer(call.encode("ascii"), dtype=np.uint8)
    r = np.frombuffer(reference.encode("ascii"), dtype=np.uint8)
    return int(_cost_matrix(c, r)[-1, -1])


# ──────────────────────────────────────────────────────────────────────────────
# Speed correlation
# ──────────────────────────────────────────────────────────────────────────────

def speed_fit(mean_length_factors: np.ndarray, speeds: np.ndarray) -> dict:
    """Least-squares fit of mean length factor against ground-truth speed."""
    x = np.asarray(speeds, dtype=np.float64).reshape(-1, 1)
    y = np.asarray(mean_length_factors, dtype=np.float64)
    if len(y) < 2:
        return {"r2": None, "slope": None, "intercept": None, "n": int(len(y)), "flag": "too_few_reads"}
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return {"r2": 0.0, "slope": 0.0, "intercept": float(y.mean()), "n": int(len(y)), "flag": "constant_input"}
    model = LinearRegression().fit(x, y)
    r2 = float(np.clip(r2_score(y, model.predict(x)), 0.0, 1.0))
    return {
        "r2": r2,
        "slope": float(model.coef_[0]),
        "intercept": float(model.intercept_),
        "n": int(len(y)),
        "flag": None,
    }


# ──────────────────────────────────────────────────────────────────────────────
# Report
# ──────────────────────────────────────────────────────────────────────────────

@dataclass
class EvalReport:
    per_read: pd.DataFrame
    median_accuracy: float
    speed_fit: Optional[dict] = None
    flagged: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        acc = self.per_read["accuracy"]
        return {
            "n_reads": int(len(self.per_read)),
            "median_accuracy": float(self.median_accuracy),
            "mean_accuracy": float(acc.mean()) if len(acc) else 0.0,
            "accuracy_quartiles": [float(q) for q in np.quantile(acc, [0.25, 0.5, 0.75])] if len(acc) else [],
            "empty_calls": self.flagged,
            "speed_fit": self.speed_fit,
        }


def evaluate(
    calls: Mapping[str, str],
    references: Mapping[str, str],
    speeds: Optional[Mapping[str, float]] = None,
    length_factors: Optional[Mapping[str, float]] = None,
) -> EvalReport:
    """Score every call against its reference; reads are processed in sorted id order."""
    orphans = sorted(set(calls) - set(references))
    if orphans:
        raise ValueError(f"{len(orphans)} calls have no reference, e.g. {orphans[:3]}")
    rows = []
    flagged = []
    for read_id in sorted(calls):
        call, ref = calls[read_id], references[read_id]
        if not call:
            flagged.append(read_id)
            logger.warning("empty call for %s scored as accuracy 0", read_id)
            aln = Alignment(0, 0, 0, len(ref))
            accuracy = 0.0
        else:
            aln = align(call, ref)
            accuracy = aln.accuracy
        rows.append({
            "read_id": read_id,
            "accuracy": accuracy,
            "matches": aln.matches,
            "mismatches": aln.mismatches,
            "insertions": aln.insertions,
            "deletions": aln.deletions,
            "call_length": len(call),
            "reference_length": len(ref),
            "speed": float(speeds[read_id]) if speeds and read_id in speeds else np.nan,
            "mean_length_factor": (
                float(length_factors[read_id]) if length_factors and read_id in length_factors else np.nan
            ),
            "empty_call": not call,
        })
    per_read = pd.DataFrame(rows, columns=PER_READ_COLUMNS)
    median = float(np.median(per_read["accuracy"])) if len(per_read) else 0.0

    fit = None
    paired = per_read.dropna(subset=["speed", "mean_length_factor"])
    if length_factors and len(paired):
        fit = speed_fit(paired["mean_length_factor"].to_numpy(), paired["speed"].to_numpy())
    return EvalReport(per_read, median, fit, flagged)


def write_report(report: EvalReport, out_dir: Path | str) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = out_dir / "eval_report.json"
    summary.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    table = out_dir / "eval_per_read.tsv"
    report.per_read.to_csv(table, sep="\t", index=False, float_format="%.6f", lineterminator="\n")
    logger.info("median accuracy %.4f over %d reads", report.median_accuracy, len(report.per_read))
    return {"report": summary, "per_read": table}

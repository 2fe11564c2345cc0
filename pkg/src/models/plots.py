"""
Plot data export: accuracy distribution, mean length factor vs speed scatter,
and per-read warped-position traces. TSVs are always written; PNGs are
rendered with matplotlib's Agg backend unless disabled.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from src.dynpool.trace import write_tsv
from src.models.evaluation import speed_fit

logger = logging.getLogger(__name__)

MAX_TRACE_READS = 12


def _read_tsv(path: Path) -> Optional[pd.DataFrame]:
    return pd.read_csv(path, sep="\t") if path.exists() else None


def _scatter_png(frame: pd.DataFrame, fit: Optional[dict], outpath: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig = plt.figure(figsize=(6.0, 5.0))
    ax = plt.gca()
    ax.scatter(frame["speed"], frame["mean_length_factor"], s=10, alpha=0.7)
    if fit and fit.get("slope") is not None:
        xs = np.linspace(frame["speed"].min(), frame["speed"].max(), 50)
        ax.plot(xs, fit["intercept"] + fit["slope"] * xs, color="black", lw=1.0,
                label=f"r² = {fit['r2']:.3f}")
        ax.legend(loc="upper left")
    ax.set_xlabel("ground-truth speed (bases / 100 signals)")
    ax.set_ylabel("mean length factor")
    fig.tight_layout()
    fig.savefig(outpath, dpi=150)
    plt.close(fig)


def _histogram_png(accuracy: pd.Series, outpath: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig = plt.figure(figsize=(6.0, 4.0))
    ax = plt.gca()
    ax.hist(accuracy, bins=40, range=(0.0, 1.0))
    ax.axvline(float(np.median(accuracy)), color="black", lw=1.0, ls="--")
    ax.set_xlabel("read accuracy")
    ax.set_ylabel("reads")
    fig.tight_layout()
    fig.savefig(outpath, dpi=150)
    plt.close(fig)


def _traces_png(positions: pd.DataFrame, outpath: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig = plt.figure(figsize=(7.0, 5.0))
    ax = plt.gca()
    for read_id, df in positions.groupby("read_id", sort=True):
        ax.plot(df["signal_index"], df["pooled_position"], lw=0.8, label=str(read_id))
    ax.set_xlabel("signal index")
    ax.set_ylabel("pooled position")
    if positions["read_id"].nunique() <= 6:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(outpath, dpi=150)
    plt.close(fig)


def export_plots(
    eval_dir: Path | str,
    out_dir: Path | str,
    basecall_dir: Optional[Path | str] = None,
    render: bool = True,
) -> dict[str, str]:
    """Write plot tables (and figures) from an eval directory and, optionally, a basecall directory."""
    eval_dir, out_dir = Path(eval_dir), Path(out_dir)
    per_read = _read_tsv(eval_dir / "eval_per_read.tsv")
    if per_read is None:
        raise FileNotFoundError(eval_dir / "eval_per_read.tsv")
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, str] = {}

    acc = per_read[["read_id", "accuracy"]]
    written["accuracy_tsv"] = str(write_tsv(acc, out_dir / "accuracy.tsv"))

    scatter = per_read.dropna(subset=["speed", "mean_length_factor"])[["read_id", "speed", "mean_length_factor"]]
    written["scatter_tsv"] = str(write_tsv(scatter, out_dir / "length_factor_vs_speed.tsv"))

    positions = None
    if basecall_dir is not None:
        positions = _read_tsv(Path(basecall_dir) / "pooling_positions.tsv")
        if positions is not None:
            keep = sorted(positions["read_id"].unique())[:MAX_TRACE_READS]
            positions = positions[positions["read_id"].isin(keep)]
            written["traces_tsv"] = str(write_tsv(positions, out_dir / "pooled_position_traces.tsv"))

    if render:
        if len(acc):
            _histogram_png(acc["accuracy"], out_dir / "accuracy_hist.png")
            written["accuracy_png"] = str(out_dir / "accuracy_hist.png")
        if len(scatter):
            fit = speed_fit(scatter["mean_length_factor"].to_numpy(), scatter["speed"].to_numpy())
            _scatter_png(scatter, fit, out_dir / "length_factor_vs_speed.png")
            written["scatter_png"] = str(out_dir / "length_factor_vs_speed.png")
        if positions is not None and len(positions):
            _traces_png(positions, out_dir / "pooled_position_traces.png")
            written["traces_png"] = str(out_dir / "pooled_position_traces.png")
    logger.info("plot data written to %s (%d files)", out_dir, len(written))
    return written

"""
Quick-start script: generate, train (smoke), basecall and eval end-to-end.
Run: python run.py [--out runs/quickstart] [--reads 120] [--seed 1]
"""
import argparse
import json
import logging
import sys
from pathlib import Path

ROOT = Path(__file__).parent
sys.path.insert(0, str(ROOT))

from src.config import load_preset, resolve_train_config
from src.data.dataset import generate_dataset
from src.data.ingestion import load_meta, reads_frame, load_split
from src.models.basecaller import basecall
from src.models.experiments import evaluate_calls
from src.models.trainer import train


def banner(title: str):
    print(f"\n{'='*60}")
    print(f"  {title}")
    print('='*60)


def parse_args():
    p = argparse.ArgumentParser()
    p.add_argument("--out", default=str(ROOT / "runs" / "quickstart"))
    p.add_argument("--reads", type=int, default=120)
    p.add_argument("--seed", type=int, default=1)
    return p.parse_args()


def main():
    args = parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    data_dir = out / "data"

    banner("1. Synthetic dataset")
    if not (data_dir / "meta.json").exists():
        generate_dataset(args.seed, args.reads, data_dir)
    meta = load_meta(data_dir)
    print(f"  splits: {meta['splits']}  speed range: [{meta['generator']['speed']['min']}, {meta['generator']['speed']['max']}]")
    frame = reads_frame(load_split("train", data_dir))
    print(f"  median read: {frame['n_bases'].median():.0f} bases, {frame['n_signals'].median():.0f} signals")

    banner("2. Training (smoke preset)")
    run = train(load_preset("smoke"), data_dir, out / "train", resolve_train_config("smoke", {"seed": args.seed}))
    print(f"  held-out loss: {run['initial_valid_loss']:.4f} -> {run['final_valid_loss']:.4f}")
    for c in run["cycles"]:
        print(f"  step {c['step']:>4d}  cycle {c['cycle']}  valid median accuracy {c['valid_median_accuracy']}")

    banner("3. Base calling")
    called = basecall(run["checkpoint"], data_dir, out / "basecall")
    print(f"  reads: {called['reads']}  empty calls: {called['empty_calls']}")
    print(f"  throughput: {called['throughput']['signals_per_s']:,.0f} signals/s")

    banner("4. Evaluation")
    report = evaluate_calls(called["outputs"]["calls"], data_dir, "test",
                            called["outputs"].get("pooling_summary"), out / "eval")
    summary = report.to_dict()
    print(f"  median accuracy: {summary['median_accuracy']:.4f}")
    print(f"  speed fit: {json.dumps(summary['speed_fit'])}")

    banner("All steps finished!")
    print("\nNext steps:")
    print("  1. Plots:    python -m src.cli export-plots --eval-dir", out / "eval", "--basecall-dir", out / "basecall", "--out", out / "plots")
    print("  2. API:      DYNPOOL_CHECKPOINT=" + str(run["checkpoint"]) + " python -m uvicorn src.api.main:app --port 8000")
    print("  3. Ablation: python -m src.cli ablation --family osprey-mini --data", data_dir, "--out", out / "ablation")


if __name__ == "__main__":
    main()

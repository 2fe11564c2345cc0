"""
Command-line entry point.

    python -m src.cli generate   --seed 1 --reads 100 --out data/run1
    python -m src.cli train      --preset smoke --recipe smoke --data data/run1 --out runs/smoke
    python -m src.cli gradcheck  --out runs/gradcheck
    python -m src.cli basecall   --checkpoint runs/smoke/model.dpk --data data/run1 --out runs/calls
    python -m src.cli eval       --calls runs/calls/calls.fastq --data data/run1 --out runs/eval
    python -m src.cli export-plots --eval-dir runs/eval --basecall-dir runs/calls --out runs/plots
    python -m src.cli ablation   --family osprey-mini --data data/run1 --out runs/ablation

Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags, invalid
config, missing inputs, output collisions).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from src.config import (
    GeneratorConfig, RunConfig, SpeedProfile, env_default, list_presets, load_json_config,
    resolve_model_config, resolve_train_config,
)
from src.errors import ConfigError, DynPoolError

logger = logging.getLogger("src.cli")

USAGE_ERRORS = (ConfigError, ValidationError, FileNotFoundError, FileExistsError, PermissionError,
                NotADirectoryError, IsADirectoryError)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, default=str))


# ── Subcommands ───────────────────────────────────────────────────────────────

def cmd_generate(args: argparse.Namespace) -> int:
    from src.data.dataset import generate_dataset

    overrides = {}
    if args.speed_min is not None or args.speed_max is not None:
        base = GeneratorConfig().speed
        overrides["speed"] = SpeedProfile(
            min=args.speed_min if args.speed_min is not None else base.min,
            max=args.speed_max if args.speed_max is not None else base.max,
        ).model_dump()
    if args.config:
        config = load_json_config(args.config, GeneratorConfig, overrides)
    else:
        config = GeneratorConfig.model_validate(overrides)
    out = generate_dataset(args.seed, args.reads, args.out, config, threads=args.threads)
    _emit({"dataset": str(out), "reads": args.reads, "seed": args.seed})
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    from src.models.trainer import train

    model_config = resolve_model_config(args.preset)
    overrides = {"seed": args.seed, "max_batches": args.max_batches}
    train_config = resolve_train_config(args.recipe, overrides)
    _emit(train(model_config, args.data, args.out, train_config))
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    from src.autodiff.gradcheck import default_cases, run_suite

    names = [n for n in args.ops.split(",") if n] if args.ops else None
    if names:
        unknown = sorted(set(names) - set(default_cases()))
        if unknown:
            raise ConfigError("ops", f"unknown gradient cases: {', '.join(unknown)}")
    reports = run_suite(seeds=args.seeds, names=names)
    failed = [r.to_dict() for r in reports if not r.passed]
    payload = {"checked": len(reports), "failed": len(failed), "failures": failed}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gradcheck.json").write_text(
            json.dumps({"reports": [r.to_dict() for r in reports], **payload}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    _emit(payload)
    return 1 if failed else 0


def cmd_basecall(args: argparse.Namespace) -> int:
    from src.models.basecaller import basecall

    config = resolve_model_config(args.preset) if args.preset else None
    result = basecall(
        args.checkpoint, args.data, args.out, split=args.split, decoder=args.decoder,
        beam_width=args.beam_width, threads=args.threads, limit=args.limit, config=config,
    )
    _emit(result)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    from src.models.experiments import evaluate_calls

    traces = args.traces
    if traces is None:
        candidate = Path(args.calls).parent / "pooling_summary.tsv"
        traces = candidate if candidate.exists() else None
    report = evaluate_calls(args.calls, args.data, args.split, traces, args.out)
    _emit(report.to_dict())
    return 0


def cmd_export_plots(args: argparse.Namespace) -> int:
    from src.models.plots import export_plots

    _emit(export_plots(args.eval_dir, args.out, args.basecall_dir, render=not args.no_render))
    return 0


def cmd_ablation(args: argparse.Namespace) -> int:
    from src.models.experiments import run_ablation

    train_config = resolve_train_config(args.recipe, {"max_batches": args.max_batches})
    _emit(run_ablation(args.family, args.data, args.out, args.seeds, train_config, args.threads))
    return 0


# ── Parser ────────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=env_default("LOG_LEVEL", "INFO"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging verbosity")
    common.add_argument("--threads", type=int, default=int(env_default("THREADS", "1")),
                        help="worker threads for read-parallel stages (1 is the determinism reference)")

    parser = argparse.ArgumentParser(
        prog="dynpool",
        description="Dynamic-pooling basecaller toolkit on synthetic nanopore-like reads.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic read dataset")
    p.add_argument("--seed", type=int, default=0, help="dataset seed; read i uses seed XOR i")
    p.add_argument("--reads", type=int, required=True, help="number of reads (>= 1)")
    p.add_argument("--out", required=True, help="output directory (must be new or empty)")
    p.add_argument("--speed-min", type=float, default=None, help="lowest per-read speed multiplier")
    p.add_argument("--speed-max", type=float, default=None, help="highest per-read speed multiplier")
    p.add_argument("--config", default=None, help="generator config JSON")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common], help="train a preset on a dataset")
    p.add_argument("--preset", required=True, help=f"preset name ({', '.join(list_presets())}) or JSON path")
    p.add_argument("--recipe", default="desk", help="training recipe name (desk, smoke) or JSON path")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory for log and checkpoints")
    p.add_argument("--seed", type=int, default=None, help="override the recipe seed")
    p.add_argument("--max-batches", type=int, default=None, help="stop early after this many batches")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference audit of every differentiable op")
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4], help="comma-separated seeds")
    p.add_argument("--ops", default=None, help="comma-separated case names (default: all)")
    p.add_argument("--out", default=None, help="directory for gradcheck.json")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("basecall", parents=[common], help="call a dataset split with a checkpoint")
    p.add_argument("--checkpoint", required=True, help="DPK1 checkpoint")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--split", default="test", choices=["train", "valid", "test"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--decoder", default="greedy", choices=["greedy", "beam"])
    p.add_argument("--beam-width", type=int, default=None, help="beam width (default from the preset)")
    p.add_argument("--limit", type=int, default=None, help="call only the first N reads")
    p.add_argument("--preset", default=None, help="expected model config; mismatches fail")
    p.set_defaults(func=cmd_basecall)

    p = sub.add_parser("eval", parents=[common], help="score calls against references")
    p.add_argument("--calls", required=True, help="FASTQ of calls")
    p.add_argument("--data", required=True, help="dataset directory holding the references")
    p.add_argument("--split", default="test", choices=["train", "valid", "test"])
    p.add_argument("--traces", default=None, help="pooling_summary.tsv (default: next to the calls)")
    p.add_argument("--out", required=True, help="output directory for the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-plots", parents=[common], help="write plot tables and figures")
    p.add_argument("--eval-dir", required=True, help="directory written by eval")
    p.add_argument("--basecall-dir", default=None, help="directory written by basecall")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-render", action="store_true", help="write TSVs only")
    p.set_defaults(func=cmd_export_plots)

    p = sub.add_parser("ablation", parents=[common], help="fixed stride vs dynamic pooling, per seed")
    p.add_argument("--family", required=True, choices=["heron-mini", "osprey-mini"])
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2], help="comma-separated seeds")
    p.add_argument("--recipe", default="desk", help="training recipe name or JSON path")
    p.add_argument("--max-batches", type=int, default=None, help="cap every run at this many batches")
    p.set_defaults(func=cmd_ablation)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def run_config(args: argparse.Namespace) -> RunConfig:
    """Validated run settings; an absent --seed stays None so recipe seeds apply."""
    out = getattr(args, "out", None)
    return RunConfig(
        subcommand=args.command,
        config=getattr(args, "config", None),
        seed=getattr(args, "seed", None),
        threads=args.threads,
        log_level=args.log_level,
        **({"out": out} if out else {}),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run = run_config(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    configure_logging(run.log_level)
    logger.debug("run: %s", run.model_dump_json())
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DynPoolError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal failure")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

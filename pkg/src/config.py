"""
Configuration models for every workflow: signal generation, model architecture,
learning-rate schedule, training and CLI runs.

All models are pydantic; JSON files load through `load_json_config`, CLI flags
override file values, and `DYNPOOL_*` environment variables (optionally from a
.env file) supply run defaults.
"""
from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Literal, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.errors import ConfigError

try:
    from dotenv import load_dotenv
    load_dotenv(Path(__file__).parent.parent / ".env")
except ImportError:
    pass  # rely on variables set externally

ROOT = Path(__file__).parent.parent
CONFIG_DIR = ROOT / "configs"
TRAIN_CONFIG_DIR = CONFIG_DIR / "train"

M = TypeVar("M", bound=BaseModel)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ── Signal generator ──────────────────────────────────────────────────────────

class SpeedProfile(_Strict):
    """Per-read speed multiplier law: log-uniform in [min, max], piecewise drift inside a read."""
    min: float = 0.7
    max: float = 1.4
    drift: float = Field(default=0.1, ge=0.0, lt=1.0)
    segment_bases: int = Field(default=100, ge=1)

    @model_validator(mode="after")
    def _bounds(self):
        if not (self.min > 0 and self.max > 0):
            raise ValueError(f"speed bounds must be positive, got [{self.min}, {self.max}]")
        if self.min > self.max:
            raise ValueError(f"speed min {self.min} exceeds max {self.max}")
        return self


class GeneratorConfig(_Strict):
    kmer: int = Field(default=5, ge=1, le=8)
    pore_seed: int = 0
    noise_sigma: float = Field(default=0.15, ge=0.0)
    duration_law: Literal["mixture", "constant"] = "mixture"
    constant_length: int = Field(default=8, ge=1)
    mixture_weights: tuple[float, float] = (0.85, 0.15)
    mixture_means: tuple[float, float] = (9.0, 25.0)
    min_event: int = Field(default=1, ge=1)
    max_event: int = Field(default=40, ge=1)
    min_bases: int = Field(default=250, ge=1)
    max_bases: int = Field(default=450, ge=1)
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    speed: SpeedProfile = SpeedProfile()

    @model_validator(mode="after")
    def _consistent(self):
        if self.min_event > self.max_event:
            raise ValueError("min_event exceeds max_event")
        if self.min_bases > self.max_bases:
            raise ValueError("min_bases exceeds max_bases")
        if self.min_bases < self.kmer:
            raise ValueError(f"reads must hold at least one {self.kmer}-mer")
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ValueError(f"split fractions must be non-negative and sum to 1, got {self.split}")
        if abs(sum(self.mixture_weights) - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        return self


# ── Architecture ──────────────────────────────────────────────────────────────

class Conv1dSpec(_Strict):
    c_in: int = Field(ge=1)
    c_out: int = Field(ge=1)
    kernel: int = Field(default=1, ge=1)
    stride: int = Field(default=1, ge=1)
    depthwise: bool = False
    bias: bool = True

    @field_validator("kernel")
    @classmethod
    def _odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {v}")
        return v

    @model_validator(mode="after")
    def _depthwise(self):
        if self.depthwise and self.c_in != self.c_out:
            raise ValueError("depthwise convolution needs c_in == c_out")
        return self


class RFGroupSpec(_Strict):
    channels: int
    kernels: tuple[int, int, int, int] = (3, 7, 15, 31)
    ratio: tuple[int, int, int, int] = (2, 2, 1, 1)

    @field_validator("channels")
    @classmethod
    def _enough(cls, v: int) -> int:
        if v < 6:
            raise ValueError(f"receptive-field groups need at least 6 channels, got {v}")
        return v

    def group_sizes(self) -> list[int]:
        """Largest-remainder split of `channels` in the configured ratio."""
        total = sum(self.ratio)
        exact = [self.channels * r / total for r in self.ratio]
        sizes = [int(math.floor(e)) for e in exact]
        left = self.channels - sum(sizes)
        # ties go to the earlier group
        order = sorted(range(4), key=lambda g: (-(exact[g] - sizes[g]), g))
        for g in order[:left]:
            sizes[g] += 1
        return sizes


class StemLayerSpec(_Strict):
    channels: int = Field(ge=1)
    kernel: int = 9

    @field_validator("kernel")
    @classmethod
    def _odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {v}")
        return v


class PoolSpec(_Strict):
    """The subsampling layer: a strided conv, or dynamic pooling in its place."""
    kind: Literal["strided", "dynpool"] = "strided"
    channels: int = Field(ge=1)
    kernel: int = 9
    stride: int = Field(default=3, ge=1)
    mw_net: Literal["pointwise", "conv3"] = "pointwise"
    mw_channels: int = 16
    mw_kernel: int = 5
    target_factor: Optional[float] = None
    ema_momentum: float = Field(default=0.99, gt=0.0, lt=1.0)
    trunc_window: int = Field(default=20, ge=0)
    sigmoid_features: bool = True
    detach_mean: bool = False

    @field_validator("kernel", "mw_kernel")
    @classmethod
    def _odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {v}")
        return v

    @property
    def target(self) -> float:
        """Target batch-mean length factor S; defaults to matching the strided variant."""
        return self.target_factor if self.target_factor is not None else 1.0 / self.stride


class BlockSpec(_Strict):
    repeats: int = Field(default=2, ge=1)
    channels: int = Field(ge=2)
    kernel: int = 15
    rf_groups: bool = False
    activation: Literal["swish", "glu"] = "swish"
    s2d: Optional[Literal["heron", "osprey"]] = None
    cross_shift: bool = False
    momentum: float = 0.1
    eps: float = 1e-5

    @field_validator("kernel")
    @classmethod
    def _odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {v}")
        return v

    @model_validator(mode="after")
    def _shapes(self):
        if self.s2d is not None and self.channels % 2:
            raise ValueError("space-to-depth blocks need an even channel count")
        if self.rf_groups and self.inner_channels < 6:
            raise ValueError("receptive-field groups need at least 6 inner channels")
        return self

    @property
    def inner_channels(self) -> int:
        return 2 * self.channels if self.s2d else self.channels


class HeadSpec(_Strict):
    decoder: Literal["ctc", "rna"] = "ctc"
    features: int = Field(default=16, ge=1)
    context_order: int = Field(default=6, ge=1, le=8)
    collapse_repeats: bool = False
    beam_width: int = Field(default=10, ge=1)


class ModelConfig(_Strict):
    name: str
    scaled_stand_in: bool = True
    in_channels: int = 1
    stem: list[StemLayerSpec] = []
    pool: PoolSpec
    blocks: list[BlockSpec] = []
    head: HeadSpec = HeadSpec()

    @property
    def uses_dynpool(self) -> bool:
        return self.pool.kind == "dynpool"


# ── Optimization ──────────────────────────────────────────────────────────────

class ScheduleSpec(_Strict):
    max_lr: float = Field(default=1e-3, gt=0.0)
    warmup_batches: int = Field(default=100, ge=0)
    first_cycle_batches: int = Field(default=400, ge=1)
    cycle_growth: int = Field(default=2, ge=1)
    cycles: int = Field(default=4, ge=1)

    def cycle_lengths(self) -> list[int]:
        return [self.first_cycle_batches * self.cycle_growth ** c for c in range(self.cycles)]

    @property
    def total_batches(self) -> int:
        """Warmup plus every cycle."""
        return self.warmup_batches + sum(self.cycle_lengths())


class TrainConfig(_Strict):
    seed: int = 0
    batch_size: int = Field(default=16, ge=1)
    chunk_signals: int = Field(default=1000, ge=16)
    weight_decay: float = Field(default=0.01, ge=0.0)
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    log_every: int = Field(default=20, ge=1)
    valid_reads: int = Field(default=20, ge=0)
    max_batches: Optional[int] = Field(default=None, ge=1)
    schedule: ScheduleSpec = ScheduleSpec()

    @property
    def budget(self) -> int:
        total = self.schedule.total_batches
        return min(total, self.max_batches) if self.max_batches else total


class RunConfig(_Strict):
    subcommand: str
    config: Optional[Path] = None
    seed: Optional[int] = None
    out: Path = Path(os.getenv("DYNPOOL_OUT_ROOT", "out"))
    threads: int = Field(default=1, ge=1)
    log_level: str = "INFO"


# ── Loading helpers ───────────────────────────────────────────────────────────

def env_default(name: str, fallback: str) -> str:
    """Read a DYNPOOL_* environment default."""
    return os.getenv(f"DYNPOOL_{name}", fallback)


def load_json_config(path: Path | str, model: Type[M], overrides: Optional[dict] = None) -> M:
    """Load a JSON file into `model`, applying non-None `overrides` on top."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fp:
        payload = json.load(fp)
    for key, value in (overrides or {}).items():
        if value is not None:
            payload[key] = value
    try:
        return model.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or model.__name__
        raise ConfigError(field, f"{first['msg']} ({path.name})") from exc


def list_presets() -> list[str]:
    return sorted(p.stem for p in CONFIG_DIR.glob("*.json"))


def load_preset(name: str) -> ModelConfig:
    """Load a shipped architecture preset by name (e.g. 'osprey-mini-dynpool')."""
    path = CONFIG_DIR / f"{name}.json"
    if not path.exists():
        raise ConfigError("preset", f"unknown preset '{name}'; available: {', '.join(list_presets())}")
    return load_json_config(path, ModelConfig)


def resolve_model_config(preset_or_path: str) -> ModelConfig:
    """Accept either a preset name or a path to a JSON architecture file."""
    candidate = Path(preset_or_path)
    if candidate.suffix == ".json" and candidate.exists():
        return load_json_config(candidate, ModelConfig)
    return load_preset(preset_or_path)


def resolve_train_config(name_or_path: str, overrides: Optional[dict] = None) -> TrainConfig:
    """Training recipe by name ('desk', 'smoke') from configs/train/, or a JSON path."""
    candidate = Path(name_or_path)
    if not (candidate.suffix == ".json" and candidate.exists()):
        candidate = TRAIN_CONFIG_DIR / f"{name_or_path}.json"
        if not candidate.exists():
            known = sorted(p.stem for p in TRAIN_CONFIG_DIR.glob("*.json"))
            raise ConfigError("train_config", f"unknown training recipe '{name_or_path}'; available: {', '.join(known)}")
    return load_json_config(candidate, TrainConfig, overrides)


__all__ = [
    "BlockSpec", "Conv1dSpec", "GeneratorConfig", "HeadSpec", "ModelConfig", "PoolSpec",
    "RFGroupSpec", "RunConfig", "ScheduleSpec", "SpeedProfile", "StemLayerSpec", "TrainConfig",
    "ValidationError", "env_default", "list_presets", "load_json_config", "load_preset",
    "resolve_model_config", "resolve_train_config",
]

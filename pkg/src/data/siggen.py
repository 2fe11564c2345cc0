"""
Synthetic nanopore-like reads.

A k-mer pore model maps each base (through the k-mer centred on it) to a
unit-scale current level; every base occupies an event whose length follows a
truncated geometric mixture scaled by the read's local speed, and each readout
adds Gaussian noise with a per-k-mer sigma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.config import GeneratorConfig, SpeedProfile
from src.decoders.alphabet import BASES, decode, encode


@dataclass
class ReadRecord:
    read_id: str
    sequence: str
    signal: np.ndarray          # float32
    speed: float                # bases per 100 signals
    event_bounds: np.ndarray    # uint32 start index per base

    @property
    def n_signals(self) -> int:
        return int(len(self.signal))

    def event_lengths(self) -> np.ndarray:
        ends = np.append(self.event_bounds[1:].astype(np.int64), self.n_signals)
        return ends - self.event_bounds.astype(np.int64)


class PoreModel:
    """Per-k-mer level (zero mean, unit variance over the table) and noise sigma, fixed by seed."""

    def __init__(self, k: int = 5, seed: int = 0, noise_sigma: float = 0.15):
        self.k = k
        rng = np.random.default_rng(seed)
        levels = rng.standard_normal(4 ** k)
        self.levels = (levels - levels.mean()) / levels.std()
        self.sigmas = noise_sigma * rng.uniform(0.75, 1.25, 4 ** k)

    @classmethod
    def from_config(cls, config: GeneratorConfig) -> "PoreModel":
        return cls(config.kmer, config.pore_seed, config.noise_sigma)

    def kmer_index(self, codes: np.ndarray) -> np.ndarray:
        """Table index of the k-mer covering each base (window start clip(i - k//2, 0, n - k))."""
        n, k = len(codes), self.k
        powers = 4 ** np.arange(k - 1, -1, -1)
        window_codes = sliding_window_view(codes, k) @ powers
        starts = np.clip(np.arange(n) - k // 2, 0, n - k)
        return window_codes[starts]


def _truncated_geometric(rng: np.random.Generator, mean: np.ndarray, low: int, high: int) -> np.ndarray:
    """Inverse-CDF draws from Geometric(p = 1/mean) on {1, 2, ...} conditioned to [low, high]."""
    p = 1.0 / np.maximum(mean, 1.0 + 1e-9)
    log_q = np.log1p(-p)
    cdf_lo = -np.expm1((low - 1) * log_q)
    cdf_hi = -np.expm1(high * log_q)
    u = cdf_lo + rng.random(mean.shape) * (cdf_hi - cdf_lo)
    k = np.ceil(np.log1p(-u) / log_q)
    return np.clip(k, low, high).astype(np.int64)


def event_durations(rng: np.random.Generator, multipliers: np.ndarray, config: GeneratorConfig) -> np.ndarray:
    if config.duration_law == "constant":
        return np.full(len(multipliers), config.constant_length, dtype=np.int64)
    component = rng.random(len(multipliers)) >= config.mixture_weights[0]
    means = np.where(component, config.mixture_means[1], config.mixture_means[0]) / multipliers
    return _truncated_geometric(rng, means, config.min_event, config.max_event)


def speed_multipliers(rng: np.random.Generator, n_bases: int, profile: SpeedProfile) -> tuple[float, np.ndarray]:
    """Read-level log-uniform multiplier, drifted per segment of `segment_bases` bases."""
    base = math.exp(rng.uniform(math.log(profile.min), math.log(profile.max)))
    n_seg = -(-n_bases // profile.segment_bases)
    span = math.log1p(profile.drift)
    drift = np.exp(rng.uniform(-span, span, n_seg)) if span > 0 else np.ones(n_seg)
    per_base = np.repeat(base * drift, profile.segment_bases)[:n_bases]
    return base, per_base


def generate_read(
    seed: int,
    seq_len: Optional[int] = None,
    speed_profile: SpeedProfile | tuple[float, float] | None = None,
    config: Optional[GeneratorConfig] = None,
    pore: Optional[PoreModel] = None,
    sequence: Optional[str] = None,
    read_id: Optional[str] = None,
) -> ReadRecord:
    config = config or GeneratorConfig()
    if isinstance(speed_profile, tuple):
        speed_profile = SpeedProfile(min=speed_profile[0], max=speed_profile[1])
    profile = speed_profile or config.speed
    pore = pore or PoreModel.from_config(config)
    rng = np.random.default_rng(seed)

    if sequence is None:
        if seq_len is None:
            seq_len = int(rng.integers(config.min_bases, config.max_bases + 1))
        codes = rng.integers(0, 4, seq_len)
        sequence = decode(codes)
    else:
        codes = encode(sequence)
    if len(codes) < pore.k:
        raise ValueError(f"sequence of {len(codes)} bases is shorter than the {pore.k}-mer model")

    _, multipliers = speed_multipliers(rng, len(codes), profile)
    durations = event_durations(rng, multipliers, config)
    kmers = pore.kmer_index(codes)
    levels = np.repeat(pore.levels[kmers], durations)
    sigmas = np.repeat(pore.sigmas[kmers], durations)
    signal = (levels + sigmas * rng.standard_normal(len(levels))).astype(np.float32)

    bounds = np.concatenate([[0], np.cumsum(durations)[:-1]]).astype(np.uint32)
    speed = float(np.float32(len(codes) / len(signal) * 100.0))
    return ReadRecord(read_id or f"read_{seed}", sequence, signal, speed, bounds)


def analytic_signal_moments(pore: PoreModel, kmers: np.ndarray, durations: np.ndarray) -> tuple[float, float]:
    """Expected mean and variance of a read's readouts given its k-mers and event lengths."""
    weights = durations / durations.sum()
    mu = float((weights * pore.levels[kmers]).sum())
    var = float((weights * (pore.levels[kmers] ** 2 + pore.sigmas[kmers] ** 2)).sum() - mu ** 2)
    return mu, var


__all__ = [
    "BASES", "PoreModel", "ReadRecord", "analytic_signal_moments", "event_durations",
    "generate_read", "speed_multipliers",
]

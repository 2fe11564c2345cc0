"""
Finite-difference gradient auditing.

Each registered case bundles a differentiable function of tensors with an
input sampler. `grad_check` projects the output on a random direction,
differentiates analytically on a tape, and compares every input element with
a central difference computed in float64.
"""
from __future__ import annotations

import importlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from src.autodiff.ops import project
from src.autodiff.tape import Tape, backward
from src.autodiff.tensor import Tensor, use_dtype

logger = logging.getLogger(__name__)

EPS = 1e-3
RTOL = 1e-2
ATOL = 1e-4

Sampler = Callable[[np.random.Generator], list[np.ndarray]]
# numeric override: (unperturbed arrays, input index, flat element index, delta) -> output array
NumericFn = Callable[[list[np.ndarray], int, int, float], np.ndarray]


@dataclass
class GradCase:
    name: str
    fn: Callable[..., Tensor]
    sample: Sampler
    input_names: Sequence[str]
    check: Optional[Sequence[int]] = None
    numeric: Optional[NumericFn] = None


@dataclass
class GradReport:
    case: str
    seed: int
    max_rel_error: dict[str, float] = field(default_factory=dict)
    passed: bool = True

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "seed": self.seed,
            "max_rel_error": {k: float(v) for k, v in self.max_rel_error.items()},
            "passed": bool(self.passed),
        }


CASES: dict[str, GradCase] = {}

# modules whose import registers their cases
_CASE_MODULES = ("src.nn.cases", "src.dynpool.cases", "src.decoders.cases")


def grad_case(name: str, input_names: Sequence[str], sample: Sampler,
              check: Optional[Sequence[int]] = None, numeric: Optional[NumericFn] = None):
    def deco(fn):
        CASES[name] = GradCase(name, fn, sample, tuple(input_names), check, numeric)
        return fn
    return deco


def default_cases() -> dict[str, GradCase]:
    for mod in _CASE_MODULES:
        importlib.import_module(mod)
    return CASES


def shaped_sampler(*shapes: Sequence[int]) -> Sampler:
    return lambda rng: [rng.standard_normal(tuple(s)) for s in shapes]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    floor = atol / rtol
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def _evaluate(case: GradCase, arrays: list[np.ndarray]) -> np.ndarray:
    return case.fn(*(Tensor(a) for a in arrays)).data


def grad_check(
    case: GradCase | str,
    input_shapes: Optional[Sequence[Sequence[int]]] = None,
    seed: int = 0,
    eps: float = EPS,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> GradReport:
    """Compare analytic and central-difference gradients for one case and seed."""
    if isinstance(case, str):
        case = default_cases()[case]
    rng = np.random.default_rng(seed)
    sampler = shaped_sampler(*input_shapes) if input_shapes is not None else case.sample

    with use_dtype(np.float64):
        arrays = [np.asarray(a, dtype=np.float64) for a in sampler(rng)]
        inputs = [Tensor(a) for a in arrays]
        with Tape() as tape:
            out = case.fn(*inputs)
            direction = rng.standard_normal(out.shape)
            loss = project(out, direction)
        backward(loss, tape)
        analytic = [tape.grad(t) for t in inputs]

        report = GradReport(case.name, seed)
        indices = case.check if case.check is not None else range(len(arrays))
        for k in indices:
            numeric = np.zeros_like(arrays[k])
            flat = numeric.reshape(-1)
            for idx in range(arrays[k].size):
                values = []
                for sign in (1.0, -1.0):
                    if case.numeric is not None:
                        y = case.numeric(arrays, k, idx, sign * eps)
                    else:
                        bumped = [a.copy() for a in arrays]
                        bumped[k].reshape(-1)[idx] += sign * eps
                        y = _evaluate(case, bumped)
                    values.append(float((np.asarray(y) * direction).sum()))
                flat[idx] = (values[0] - values[1]) / (2.0 * eps)
            err = relative_error(analytic[k], numeric, rtol, atol)
            worst = float(err.max()) if err.size else 0.0
            report.max_rel_error[case.input_names[k]] = worst
            if not worst <= rtol:
                report.passed = False
    logger.debug("grad_check %s seed=%d -> %s", case.name, seed, report.max_rel_error)
    return report


def run_suite(seeds: Sequence[int] = (0, 1, 2, 3, 4), names: Optional[Sequence[str]] = None) -> list[GradReport]:
    cases = default_cases()
    selected = names if names else sorted(cases)
    reports = []
    for name in selected:
        for seed in seeds:
            report = grad_check(cases[name], seed=seed)
            if not report.passed:
                logger.warning("grad_check failed: %s seed=%d %s", name, seed, report.max_rel_error)
            reports.append(report)
    return reports

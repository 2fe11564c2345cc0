"""Gradient-check cases for the convolutional ops and their composites."""
from __future__ import annotations

import numpy as np

from src.autodiff.gradcheck import grad_case, shaped_sampler
from src.autodiff.ops import apply_op, batch_take, sigmoid
from src.nn import functional as F

RF_SIZES = (2, 2, 1, 1)
RF_KERNELS = (3, 7, 15, 31)


@grad_case("elementwise", ("a", "b"), shaped_sampler((2, 3), (2, 3)))
def _elementwise(a, b):
    return (a * b) - a + b * 0.5


@grad_case("sigmoid", ("x",), shaped_sampler((4,)))
def _sigmoid(x):
    return sigmoid(x)


@grad_case("conv1d", ("x", "weight", "bias"), shaped_sampler((1, 8, 2), (3, 3, 2), (3,)))
def _conv1d(x, W, b):
    return F.conv1d(x, W, b)


@grad_case("conv1d_strided", ("x", "weight", "bias"), shaped_sampler((2, 10, 2), (3, 5, 2), (3,)))
def _conv1d_strided(x, W, b):
    return F.conv1d(x, W, b, stride=3)


@grad_case("conv1d_pointwise", ("x", "weight", "bias"), shaped_sampler((2, 6, 4), (3, 1, 4), (3,)))
def _conv1d_pointwise(x, W, b):
    return F.conv1d(x, W, b)


@grad_case("depthwise_conv1d", ("x", "weight", "bias"), shaped_sampler((2, 9, 3), (3, 5), (3,)))
def _depthwise(x, W, b):
    return F.depthwise_conv1d(x, W, b)


def _bn_sample(rng):
    return [rng.standard_normal((2, 5, 3)), 1.0 + 0.5 * rng.standard_normal(3), rng.standard_normal(3)]


@grad_case("batch_norm", ("x", "gamma", "beta"), _bn_sample)
def _batch_norm(x, gamma, beta):
    y, _ = apply_op("batch_norm", x, gamma, beta, eps=1e-5)
    return y


@grad_case("batch_norm_eval", ("x", "gamma", "beta"), _bn_sample)
def _batch_norm_eval(x, gamma, beta):
    return apply_op(
        "batch_norm_eval", x, gamma, beta,
        running_mean=np.array([0.1, -0.2, 0.3]), running_var=np.array([0.5, 1.5, 2.0]), eps=1e-5,
    )


@grad_case("swish", ("x",), shaped_sampler((2, 5, 3)))
def _swish(x):
    return F.swish(x)


@grad_case("glu", ("x",), shaped_sampler((2, 5, 6)))
def _glu(x):
    return F.glu(x)


@grad_case("cross_shift", ("x",), shaped_sampler((2, 5, 4)))
def _cross_shift(x):
    return F.cross_shift(x)


@grad_case("mean_pool", ("x",), shaped_sampler((2, 7, 3)))
def _mean_pool(x):
    return F.mean_pool(x, 3)


@grad_case("time_pad", ("x",), shaped_sampler((2, 4, 3)))
def _time_pad(x):
    return F.time_pad(x, 6)


@grad_case("space_to_depth_heron", ("x", "weight", "bias"), shaped_sampler((1, 7, 2), (4, 1, 6), (4,)))
def _s2d_heron(x, W, b):
    return F.conv1d(F.time_fold(x, 3), W, b)


@grad_case("space_to_depth_osprey", ("x", "weight", "bias"), shaped_sampler((1, 7, 2), (4, 1, 2), (4,)))
def _s2d_osprey(x, W, b):
    return F.conv1d(F.mean_pool(x, 3), W, b)


@grad_case("depth_to_space_heron", ("x", "weight", "bias"), shaped_sampler((1, 3, 4), (6, 1, 4), (6,)))
def _d2s_heron(x, W, b):
    return F.time_unfold(F.conv1d(x, W, b), 3, 8)


@grad_case(
    "depth_to_space_osprey",
    ("x", "w0", "b0", "w1", "b1", "w2", "b2"),
    shaped_sampler((1, 3, 8), (2, 1, 4), (2,), (2, 1, 4), (2,), (2, 1, 4), (2,)),
)
def _d2s_osprey(x, w0, b0, w1, b1, w2, b2):
    phases = [
        F.conv1d(F.channel_slice(x, lo, lo + 4), W, b)
        for lo, W, b in ((0, w0, b0), (2, w1, b1), (4, w2, b2))
    ]
    return F.time_unfold(F.concat(phases), 3, 7)


@grad_case(
    "rf_group_depthwise",
    ("x", "w0", "b0", "w1", "b1", "w2", "b2", "w3", "b3"),
    shaped_sampler(
        (1, 12, 6),
        *[s for size, k in zip(RF_SIZES, RF_KERNELS) for s in ((size, k), (size,))],
    ),
)
def _rf_groups(x, *wb):
    parts = []
    lo = 0
    for g, size in enumerate(RF_SIZES):
        parts.append(F.depthwise_conv1d(F.channel_slice(x, lo, lo + size), wb[2 * g], wb[2 * g + 1]))
        lo += size
    return F.concat(parts)


@grad_case("batch_take", ("x",), shaped_sampler((4, 3, 2)))
def _batch_take(x):
    return batch_take(x, [2, 0, 2])

"""
Differentiable 1-D convolution ops over [batch, time, channels] arrays.

Time padding is zero-filled; strided and compressed outputs have length
ceil(T / stride). Every op here registers a forward and an explicit backward
with the autodiff registry.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.autodiff.ops import apply_op, expect_shape, register_op, sigmoid_np
from src.autodiff.tensor import Tensor
from src.errors import ShapeError


def out_length(T: int, stride: int) -> int:
    return -(-T // stride)


# ── convolutions ──────────────────────────────────────────────────────────────

@register_op("conv1d")
def _conv1d(x, W, b, stride: int = 1):
    expect_shape("conv1d", x, (None, None, W.shape[2]))
    expect_shape("conv1d.bias", b, (W.shape[0],))
    c_out, D, c_in = W.shape
    if D % 2 == 0:
        raise ShapeError("conv1d.kernel", "odd kernel size", D)
    B, T, _ = x.shape
    pad = D // 2
    To = out_length(T, stride)
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    win = sliding_window_view(xp, D, axis=1)[:, ::stride][:, :To]  # [B, To, C_in, D]
    cols = win.reshape(B * To, c_in * D)
    Wm = W.transpose(2, 1, 0).reshape(c_in * D, c_out)
    y = (cols @ Wm).reshape(B, To, c_out) + b

    def backward(g):
        gm = g.reshape(B * To, c_out)
        dW = (cols.T @ gm).reshape(c_in, D, c_out).transpose(2, 1, 0)
        dwin = (gm @ Wm.T).reshape(B, To, c_in, D)
        dxp = np.zeros_like(xp)
        span = (To - 1) * stride + 1
        for d in range(D):
            dxp[:, d:d + span:stride, :] += dwin[..., d]
        return dxp[:, pad:pad + T, :], dW, g.sum(axis=(0, 1))

    return y, backward


@register_op("depthwise_conv1d")
def _depthwise_conv1d(x, W, b, stride: int = 1):
    C, D = W.shape
    expect_shape("depthwise_conv1d", x, (None, None, C))
    expect_shape("depthwise_conv1d.bias", b, (C,))
    if D % 2 == 0:
        raise ShapeError("depthwise_conv1d.kernel", "odd kernel size", D)
    B, T, _ = x.shape
    pad = D // 2
    To = out_length(T, stride)
    span = (To - 1) * stride + 1
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    y = np.zeros((B, To, C), dtype=x.dtype)
    for d in range(D):
        y += xp[:, d:d + span:stride, :] * W[:, d]
    y += b

    def backward(g):
        dxp = np.zeros_like(xp)
        dW = np.empty_like(W)
        for d in range(D):
            dW[:, d] = (xp[:, d:d + span:stride, :] * g).sum(axis=(0, 1))
            dxp[:, d:d + span:stride, :] += g * W[:, d]
        return dxp[:, pad:pad + T, :], dW, g.sum(axis=(0, 1))

    return y, backward


def conv1d(x: Tensor, W: Tensor, b: Tensor, stride: int = 1) -> Tensor:
    return apply_op("conv1d", x, W, b, stride=stride)


def depthwise_conv1d(x: Tensor, W: Tensor, b: Tensor, stride: int = 1) -> Tensor:
    return apply_op("depthwise_conv1d", x, W, b, stride=stride)


# ── normalization ─────────────────────────────────────────────────────────────

@register_op("batch_norm")
def _batch_norm(x, gamma, beta, eps: float = 1e-5):
    """Train mode: normalize with biased batch statistics; aux = (mean, var)."""
    C = gamma.shape[0]
    expect_shape("batch_norm", x, (None, None, C))
    n = x.shape[0] * x.shape[1]
    if n < 2:
        raise ShapeError("batch_norm", "at least 2 values per channel", x.shape)
    mu = x.mean(axis=(0, 1))
    var = x.var(axis=(0, 1))
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    y = xhat * gamma + beta

    def backward(g):
        dxhat = g * gamma
        s1 = dxhat.sum(axis=(0, 1))
        s2 = (dxhat * xhat).sum(axis=(0, 1))
        dx = (inv / n) * (n * dxhat - s1 - xhat * s2)
        return dx, (g * xhat).sum(axis=(0, 1)), g.sum(axis=(0, 1))

    return y, backward, (mu, var)


@register_op("batch_norm_eval")
def _batch_norm_eval(x, gamma, beta, running_mean: np.ndarray, running_var: np.ndarray, eps: float = 1e-5):
    C = gamma.shape[0]
    expect_shape("batch_norm_eval", x, (None, None, C))
    inv = (1.0 / np.sqrt(running_var + eps)).astype(x.dtype)
    xhat = (x - running_mean.astype(x.dtype)) * inv
    y = xhat * gamma + beta

    def backward(g):
        return g * gamma * inv, (g * xhat).sum(axis=(0, 1)), g.sum(axis=(0, 1))

    return y, backward


# ── activations ───────────────────────────────────────────────────────────────

@register_op("swish")
def _swish(x):
    s = sigmoid_np(x)
    return x * s, lambda g: (g * (s + x * s * (1.0 - s)),)


@register_op("glu")
def _glu(x):
    C2 = x.shape[-1]
    if C2 % 2:
        raise ShapeError("glu", "even channel count", C2)
    h = C2 // 2
    a, gate = x[..., :h], x[..., h:]
    s = sigmoid_np(gate)

    def backward(g):
        return (np.concatenate([g * s, g * a * s * (1.0 - s)], axis=-1),)

    return a * s, backward


def swish(x: Tensor) -> Tensor:
    return apply_op("swish", x)


def glu(x: Tensor) -> Tensor:
    return apply_op("glu", x)


def activation(x: Tensor, kind: str) -> Tensor:
    return glu(x) if kind == "glu" else swish(x)


# ── time / channel rearrangement ──────────────────────────────────────────────

@register_op("cross_shift")
def _cross_shift(x):
    C = x.shape[-1]
    if C % 2:
        raise ShapeError("cross_shift", "even channel count", C)
    h = C // 2
    y = np.zeros_like(x)
    y[:, 1:, :h] = x[:, :-1, :h]
    y[:, :-1, h:] = x[:, 1:, h:]

    def backward(g):
        dx = np.zeros_like(g)
        dx[:, :-1, :h] = g[:, 1:, :h]
        dx[:, 1:, h:] = g[:, :-1, h:]
        return (dx,)

    return y, backward


def _pad_time(x, factor):
    T = x.shape[1]
    extra = out_length(T, factor) * factor - T
    return np.pad(x, ((0, 0), (0, extra), (0, 0))) if extra else x


@register_op("mean_pool")
def _mean_pool(x, size: int):
    """Non-overlapping window mean; a partial last window counts zero padding."""
    B, T, C = x.shape
    xp = _pad_time(x, size)
    L = xp.shape[1] // size
    blocks = xp.reshape(B, L, size, C)
    inv = np.asarray(1.0 / size, dtype=x.dtype)
    y = np.zeros((B, L, C), dtype=x.dtype)
    for k in range(size):
        y += blocks[:, :, k, :] * inv

    def backward(g):
        dx = np.repeat(g * inv, size, axis=1)
        return (dx[:, :T, :],)

    return y, backward


@register_op("time_fold")
def _time_fold(x, factor: int):
    """[B, T, C] -> [B, ceil(T/f), f*C]: consecutive time steps stacked on channels."""
    B, T, C = x.shape
    xp = _pad_time(x, factor)
    L = xp.shape[1] // factor
    return xp.reshape(B, L, factor * C), lambda g: (g.reshape(B, L * factor, C)[:, :T, :],)


@register_op("time_unfold")
def _time_unfold(x, factor: int, length: int):
    """[B, L, f*C] -> [B, length, C] with length <= f*L (phase k of step t lands at f*t+k)."""
    B, L, FC = x.shape
    if FC % factor:
        raise ShapeError("time_unfold", f"channels divisible by {factor}", FC)
    C = FC // factor
    if length > L * factor:
        raise ShapeError("time_unfold", f"length <= {L * factor}", length)
    y = x.reshape(B, L * factor, C)[:, :length, :]

    def backward(g):
        full = np.zeros((B, L * factor, C), dtype=g.dtype)
        full[:, :length, :] = g
        return (full.reshape(B, L, FC),)

    return y, backward


@register_op("channel_slice")
def _channel_slice(x, start: int, stop: int):
    C = x.shape[-1]
    if not 0 <= start < stop <= C:
        raise ShapeError("channel_slice", f"0 <= {start} < {stop} <= channels", C)

    def backward(g):
        dx = np.zeros(x.shape, dtype=g.dtype)
        dx[..., start:stop] = g
        return (dx,)

    return x[..., start:stop], backward


@register_op("concat")
def _concat(*xs, axis: int = -1):
    sizes = [x.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]
    try:
        y = np.concatenate(xs, axis=axis)
    except ValueError:
        raise ShapeError("concat", [x.shape for x in xs[:1]], [x.shape for x in xs[1:]]) from None
    return y, lambda g: tuple(np.split(g, splits, axis=axis))


@register_op("time_pad")
def _time_pad(x, length: int):
    """Zero-pad (or keep) the time axis to `length`."""
    B, T, C = x.shape
    if length < T:
        raise ShapeError("time_pad", f"length >= {T}", length)
    y = np.zeros((B, length, C), dtype=x.dtype)
    y[:, :T] = x
    return y, lambda g: (g[:, :T],)


def cross_shift(x: Tensor) -> Tensor:
    return apply_op("cross_shift", x)


def mean_pool(x: Tensor, size: int) -> Tensor:
    return apply_op("mean_pool", x, size=size)


def time_fold(x: Tensor, factor: int) -> Tensor:
    return apply_op("time_fold", x, factor=factor)


def time_unfold(x: Tensor, factor: int, length: int) -> Tensor:
    return apply_op("time_unfold", x, factor=factor, length=length)


def channel_slice(x: Tensor, start: int, stop: int) -> Tensor:
    return apply_op("channel_slice", x, start=start, stop=stop)


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    return xs[0] if len(xs) == 1 else apply_op("concat", *xs, axis=axis)


def time_pad(x: Tensor, length: int) -> Tensor:
    return x if x.shape[1] == length else apply_op("time_pad", x, length=length)


# ── initialization ────────────────────────────────────────────────────────────

def kaiming(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * math.sqrt(2.0 / max(fan_in, 1))


def glu_init(weights: np.ndarray) -> np.ndarray:
    """Copy the first half of the output dimension (axis 0) onto the second half."""
    weights = np.array(weights, copy=True)
    n = weights.shape[0]
    if n % 2:
        raise ShapeError("glu_init", "even output dimension", n)
    weights[n // 2:] = weights[: n // 2]
    return weights

"""Differentiable operations over `Tensor`.

Every op computes its forward value with numpy and, when any input needs a
gradient, attaches an `AutodiffNode` whose backward rule returns one gradient
per input.
"""
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from rfshake.errors import (
    ArgumentError, DegenerateBatchError, DimensionError, EmptyLossError,
)
from .tensor import ArrayLike, OpKind, Tensor, as_tensor, make_result


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Union[Tensor, ArrayLike], b: Union[Tensor, ArrayLike]) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, OpKind.ADD, [a, b], backward)


def mul(a: Union[Tensor, ArrayLike], b: Union[Tensor, ArrayLike]) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    b_data = b.data.astype(a.dtype, copy=False)

    def backward(g: np.ndarray):
        return (
            _unbroadcast(g * b_data, a.shape),
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return make_result(a.data * b_data, OpKind.MUL, [a, b], backward)


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    def backward(g: np.ndarray):
        return (np.broadcast_to(g, x.shape).astype(x.dtype),)

    return make_result(np.asarray(x.data.sum(), dtype=x.dtype), OpKind.SUM, [x], backward)


def mean(x: Tensor) -> Tensor:
    n = x.size

    def backward(g: np.ndarray):
        return (np.broadcast_to(g / n, x.shape).astype(x.dtype),)

    return make_result(np.asarray(x.data.mean(), dtype=x.dtype), OpKind.MEAN, [x], backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    def backward(g: np.ndarray):
        return (g.reshape(x.shape),)

    return make_result(x.data.reshape(tuple(shape)), OpKind.RESHAPE, [x], backward)


def conv2d(x: Tensor, weight: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of `x` [N,C_in,H,W] with `weight` [C_out,C_in,kh,kw].

    The forward pass unfolds the padded input into its sliding windows and
    contracts them against the filters (im2col); the input gradient folds the
    windows back one filter tap at a time.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"conv2d channel mismatch: input has {x.shape[1]}, weight expects {weight.shape[1]}"
        )
    if stride < 1:
        raise ArgumentError(f"conv2d stride must be >= 1, got {stride}")
    if padding < 0:
        raise ArgumentError(f"conv2d padding must be >= 0, got {padding}")

    n, c_in, h, w = x.shape
    c_out, _, kh, kw = weight.shape
    if kh < 1 or kw < 1:
        raise ArgumentError(f"conv2d kernel must be at least 1x1, got {kh}x{kw}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise DimensionError(
            f"conv2d input {h}x{w} with padding {padding} is smaller than kernel {kh}x{kw}"
        )

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    h_out, w_out = windows.shape[2], windows.shape[3]
    out = np.tensordot(windows, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)

    def backward(g: np.ndarray):
        grad_w = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_xp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                tap = np.tensordot(g, weight.data[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
                grad_xp[:, :, i:i + stride * h_out:stride, j:j + stride * w_out:stride] += tap
        grad_x = grad_xp[:, :, padding:padding + h, padding:padding + w]
        return grad_x, grad_w

    return make_result(
        np.ascontiguousarray(out), OpKind.CONV2D, [x, weight], backward,
        saved_context={"stride": stride, "padding": padding},
    )


def _pool_windows(x: Tensor, k: int, stride: int, op_name: str) -> np.ndarray:
    if x.ndim != 4:
        raise DimensionError(f"{op_name} expects 4-D input, got {x.shape}")
    if k < 1 or stride < 1:
        raise ArgumentError(f"{op_name} needs k >= 1 and stride >= 1, got k={k}, stride={stride}")
    if x.shape[2] < k or x.shape[3] < k:
        raise DimensionError(f"{op_name} window {k}x{k} does not fit input {x.shape[2]}x{x.shape[3]}")
    return sliding_window_view(x.data, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def maxpool2d(x: Tensor, k: int = 2, stride: int = 2) -> Tensor:
    """Max over each k×k window; ties go to the first cell in row-major order."""
    windows = _pool_windows(x, k, stride, "maxpool2d")
    n, c, h_out, w_out = windows.shape[:4]
    flat = windows.reshape(n, c, h_out, w_out, k * k)
    argmax = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray):
        grad_x = np.zeros_like(x.data)
        for tap in range(k * k):
            i, j = divmod(tap, k)
            grad_x[:, :, i:i + stride * h_out:stride, j:j + stride * w_out:stride] += np.where(argmax == tap, g, 0)
        return (grad_x,)

    return make_result(
        np.ascontiguousarray(out), OpKind.MAXPOOL2D, [x], backward,
        saved_context={"k": k, "stride": stride},
    )


def sum_pool2d(x: Tensor, k: int = 2, stride: int = 2) -> Tensor:
    windows = _pool_windows(x, k, stride, "sum_pool2d")
    h_out, w_out = windows.shape[2], windows.shape[3]
    out = windows.sum(axis=(-2, -1))

    def backward(g: np.ndarray):
        grad_x = np.zeros_like(x.data)
        for i in range(k):
            for j in range(k):
                grad_x[:, :, i:i + stride * h_out:stride, j:j + stride * w_out:stride] += g
        return (grad_x,)

    return make_result(out, OpKind.SUMPOOL2D, [x], backward, saved_context={"k": k, "stride": stride})


class RunningStats:
    """Per-channel running mean/variance of a batchnorm layer."""

    def __init__(self, channels: int, momentum: float = BN_MOMENTUM, dtype=np.float32) -> None:
        if not 0.0 <= momentum <= 1.0:
            raise ArgumentError(f"batchnorm momentum must lie in [0, 1], got {momentum}")
        self.momentum = momentum
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)

    def update(self, batch_mean: np.ndarray, batch_var_unbiased: np.ndarray) -> None:
        m = self.momentum
        self.mean = ((1.0 - m) * self.mean + m * batch_mean).astype(self.mean.dtype)
        self.var = ((1.0 - m) * self.var + m * batch_var_unbiased).astype(self.var.dtype)


def batchnorm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_stats: RunningStats,
    mode: Union[Mode, str] = Mode.TRAIN,
    eps: float = BN_EPSILON,
) -> Tensor:
    if x.ndim != 4:
        raise DimensionError(f"batchnorm2d expects 4-D input, got {x.shape}")
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise DimensionError(
            f"batchnorm2d affine params must have shape ({channels},), got {gamma.shape} and {beta.shape}"
        )

    mode = Mode(mode)
    axes = (0, 2, 3)
    shape = (1, channels, 1, 1)
    count = x.shape[0] * x.shape[2] * x.shape[3]

    if mode is Mode.TRAIN:
        if count < 2:
            raise DegenerateBatchError(
                f"batchnorm2d needs N*H*W >= 2 in train mode, got {count}"
            )
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_stats.update(mu, var * count / (count - 1))
    else:
        mu = running_stats.mean.astype(x.dtype)
        var = running_stats.var.astype(x.dtype)

    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    x_hat = (x.data - mu.reshape(shape)) * inv_std.reshape(shape)
    out = gamma.data.reshape(shape) * x_hat + beta.data.reshape(shape)

    def backward(g: np.ndarray):
        grad_beta = g.sum(axis=axes)
        grad_gamma = (g * x_hat).sum(axis=axes)
        g_hat = g * gamma.data.reshape(shape)
        if mode is Mode.TRAIN:
            grad_x = (inv_std.reshape(shape) / count) * (
                count * g_hat
                - g_hat.sum(axis=axes, keepdims=True)
                - x_hat * (g_hat * x_hat).sum(axis=axes, keepdims=True)
            )
        else:
            grad_x = g_hat * inv_std.reshape(shape)
        return grad_x, grad_gamma, grad_beta

    return make_result(
        out.astype(x.dtype, copy=False), OpKind.BATCHNORM2D, [x, gamma, beta], backward,
        saved_context={"mode": mode.value, "eps": eps},
    )


def relu(x: Tensor) -> Tensor:
    positive = x.data > 0

    def backward(g: np.ndarray):
        return (g * positive,)

    return make_result(np.where(positive, x.data, 0).astype(x.dtype), OpKind.RELU, [x], backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """`x @ weight.T + bias` for x [N, in] and weight [out, in]."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(f"linear shape mismatch: input {x.shape}, weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError(f"linear bias must have shape ({weight.shape[0]},), got {bias.shape}")

    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data
    inputs = [x, weight] + ([bias] if bias is not None else [])

    def backward(g: np.ndarray):
        grads = [g @ weight.data, g.T @ x.data]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return tuple(grads)

    return make_result(out, OpKind.LINEAR, inputs, backward)


def global_avg_pool(x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise DimensionError(f"global_avg_pool expects 4-D input, got {x.shape}")
    area = x.shape[2] * x.shape[3]

    def backward(g: np.ndarray):
        return (np.broadcast_to(g[:, :, None, None] / area, x.shape).astype(x.dtype),)

    return make_result(x.data.mean(axis=(2, 3)), OpKind.GLOBAL_AVG_POOL, [x], backward)


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data).astype(x.dtype)

    def backward(g: np.ndarray):
        return (g * s * (1.0 - s),)

    return make_result(s, OpKind.SIGMOID, [x], backward)


def bce_with_logits(
    logits: Tensor,
    targets: Union[Tensor, ArrayLike],
    known: Optional[ArrayLike] = None,
) -> Tensor:
    """Mean binary cross-entropy over the known (sample, label) pairs.

    `targets` may be soft labels in [0, 1]; `known` is a boolean mask where
    False marks an unknown label that contributes nothing to the loss.
    Uses max(x, 0) - x*y + log(1 + exp(-|x|)), finite for any finite logit.
    """
    y = np.asarray(targets.data if isinstance(targets, Tensor) else targets, dtype=logits.dtype)
    if y.shape != logits.shape:
        raise DimensionError(f"bce_with_logits targets {y.shape} do not match logits {logits.shape}")
    if np.any(y < 0) or np.any(y > 1) or not np.all(np.isfinite(y)):
        raise ArgumentError("bce_with_logits targets must lie in [0, 1]")

    mask = np.ones(logits.shape, dtype=bool) if known is None else np.asarray(known, dtype=bool)
    if mask.shape != logits.shape:
        raise DimensionError(f"bce_with_logits mask {mask.shape} does not match logits {logits.shape}")
    count = int(mask.sum())
    if count == 0:
        raise EmptyLossError("bce_with_logits: every label is masked as unknown")

    x = logits.data
    per_element = np.maximum(x, 0) - x * y + np.log1p(np.exp(-np.abs(x)))
    loss = np.where(mask, per_element, 0).sum() / count

    def backward(g: np.ndarray):
        return (g * np.where(mask, expit(x) - y, 0).astype(x.dtype) / count,)

    return make_result(
        np.asarray(loss, dtype=logits.dtype), OpKind.BCE_WITH_LOGITS, [logits], backward,
        saved_context={"count": count},
    )

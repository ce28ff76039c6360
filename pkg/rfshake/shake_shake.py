"""Stochastic affine combination of two residual branches.

Forward mixes the branches with (α, 1-α); backward hands the incoming
gradient to them with (β, 1-β), β drawn independently of α. Both are drawn
per sample. Evaluation always uses α = 0.5. The identity branch is never
shaken.
"""
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from rfshake.errors import ArgumentError, ContractError, DimensionError
from rfshake.tensor_engine import Mode, OpKind, Tensor, as_tensor
from rfshake.tensor_engine.tensor import make_result

EVAL_ALPHA = 0.5


@dataclass(frozen=True)
class ShakeCoefficients:
    alpha_forward: np.ndarray
    beta_backward: np.ndarray
    mode: Mode = Mode.TRAIN

    @property
    def batch_size(self) -> int:
        return int(self.alpha_forward.shape[0])

    @classmethod
    def for_eval(cls, batch_size: int) -> 'ShakeCoefficients':
        half = np.full(batch_size, EVAL_ALPHA)
        return cls(alpha_forward=half, beta_backward=half.copy(), mode=Mode.EVAL)


def sample_coefficients(
    batch_size: int,
    rng_stream: Optional[np.random.Generator] = None,
    mode: Union[Mode, str] = Mode.TRAIN,
) -> ShakeCoefficients:
    """Draw α and β i.i.d. Uniform[0, 1] per sample; eval mode ignores the stream."""
    if batch_size < 1:
        raise ArgumentError(f"batch_size must be >= 1, got {batch_size}")
    mode = Mode(mode)
    if mode is Mode.EVAL:
        return ShakeCoefficients.for_eval(batch_size)
    if rng_stream is None:
        raise ArgumentError("train-mode shake sampling needs an rng stream")
    alpha = rng_stream.uniform(0.0, 1.0, size=batch_size)
    beta = rng_stream.uniform(0.0, 1.0, size=batch_size)
    return ShakeCoefficients(alpha_forward=alpha, beta_backward=beta, mode=mode)


def block_streams(seed: Union[int, np.random.SeedSequence], n_blocks: int) -> List[np.random.Generator]:
    """One independent generator per block, so blocks never share RNG state."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in seq.spawn(n_blocks)]


def shake_combine(x: Tensor, b1: Tensor, b2: Tensor, coeffs: ShakeCoefficients) -> Tensor:
    """x + (α·b1 + (1-α)·b2), with α broadcast over every axis but the batch axis."""
    x, b1, b2 = as_tensor(x), as_tensor(b1), as_tensor(b2)
    if not (x.shape == b1.shape == b2.shape):
        raise DimensionError(f"shake_combine shapes differ: {x.shape}, {b1.shape}, {b2.shape}")
    if coeffs.batch_size != x.shape[0]:
        raise DimensionError(
            f"shake coefficients cover {coeffs.batch_size} samples, batch has {x.shape[0]}"
        )
    if coeffs.mode is Mode.EVAL and (
        np.any(coeffs.alpha_forward != EVAL_ALPHA) or np.any(coeffs.beta_backward != EVAL_ALPHA)
    ):
        raise ContractError("eval-mode shake must use alpha = 0.5")

    per_sample = (x.shape[0],) + (1,) * (x.ndim - 1)
    alpha = coeffs.alpha_forward.reshape(per_sample).astype(x.dtype)
    beta = coeffs.beta_backward.reshape(per_sample).astype(x.dtype)
    out = x.data + (alpha * b1.data + (1 - alpha) * b2.data)

    def backward(g: np.ndarray):
        return g, beta * g, (1 - beta) * g

    return make_result(
        out, OpKind.SHAKE, [x, b1, b2], backward,
        saved_context={"alpha": alpha, "beta": beta},
    )

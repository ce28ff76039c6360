from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(fn: Callable[[], Tensor], target: Tensor, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of the scalar `fn()` with respect to `target.data`."""
    grad = np.zeros_like(target.data)
    flat = target.data.reshape(-1)
    out = grad.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + h
        plus = fn().item()
        flat[index] = original - h
        minus = fn().item()
        flat[index] = original
        out[index] = (plus - minus) / (2.0 * h)
    return grad


def gradcheck(fn: Callable[[], Tensor], inputs: Sequence[Tensor], h: float = 1e-4) -> float:
    """Max of |analytic - fd| / max(1, |analytic|) over every entry of `inputs`.

    `fn` must rebuild the graph from `inputs` on every call and return a scalar.
    Run it in float64.
    """
    for tensor in inputs:
        tensor.zero_grad()
    fn().backward()
    analytic = [tensor.grad.copy() for tensor in inputs]

    worst = 0.0
    for tensor, grad in zip(inputs, analytic):
        numeric = numerical_grad(fn, tensor, h)
        error = np.abs(grad - numeric) / np.maximum(1.0, np.abs(grad))
        worst = max(worst, float(error.max(initial=0.0)))
    return worst

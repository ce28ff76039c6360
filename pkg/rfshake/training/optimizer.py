from typing import Dict

import numpy as np

from rfshake.architectures import ModelState
from rfshake.errors import DimensionError, TrainingDivergedError


def adam_step(
    state: ModelState,
    grads: Dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ModelState:
    """One bias-corrected Adam update of every parameter, in place.

    m ← β1·m + (1−β1)·g, v ← β2·v + (1−β2)·g², θ ← θ − lr·m̂/(√v̂ + eps)
    with m̂ = m/(1−β1ᵗ), v̂ = v/(1−β2ᵗ).

    Raises:
        TrainingDivergedError: a gradient holds NaN or inf; nothing is updated.
    """
    params = state.parameters
    step = state.step_count + 1
    for name, tensor in params.items():
        g = grads[name]
        if g.shape != tensor.shape:
            raise DimensionError(f"gradient of {name} has shape {g.shape}, parameter {tensor.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient for {name}", step=step)

    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    for name, tensor in params.items():
        g = grads[name]
        m = state.adam_m[name] = beta1 * state.adam_m[name] + (1.0 - beta1) * g
        v = state.adam_v[name] = beta2 * state.adam_v[name] + (1.0 - beta2) * (g * g)
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        tensor.data = (tensor.data - update).astype(tensor.dtype)

    state.step_count = step
    return state

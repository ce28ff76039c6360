from typing import NamedTuple, Optional

import numpy as np

from rfshake.errors import ArgumentError, DimensionError


class MixedBatch(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    known: Optional[np.ndarray]
    lam: float


def sample_lambda(rng: np.random.Generator, concentration: float) -> float:
    if concentration <= 0:
        raise ArgumentError(f"mixup concentration must be > 0, got {concentration}")
    return float(rng.beta(concentration, concentration))


def mixup_batch(
    x1: np.ndarray,
    y1: np.ndarray,
    x2: np.ndarray,
    y2: np.ndarray,
    lam: Optional[float] = None,
    known1: Optional[np.ndarray] = None,
    known2: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    concentration: float = 0.2,
) -> MixedBatch:
    """x = λ·x1 + (1−λ)·x2, y = λ·y1 + (1−λ)·y2.

    A label stays known only if it is known in both inputs. When `lam` is
    None it is drawn from Beta(concentration, concentration) with `rng`.
    """
    if lam is None:
        if rng is None:
            raise ArgumentError("mixup_batch needs either lam or rng")
        lam = sample_lambda(rng, concentration)
    if not 0.0 <= lam <= 1.0:
        raise ArgumentError(f"mixup lambda must lie in [0, 1], got {lam}")
    if x1.shape != x2.shape or y1.shape != y2.shape:
        raise DimensionError(f"mixup pairs differ in shape: {x1.shape}/{x2.shape}, {y1.shape}/{y2.shape}")

    x = lam * x1 + (1.0 - lam) * x2
    y = lam * y1 + (1.0 - lam) * y2
    known = None
    if known1 is not None or known2 is not None:
        k1 = np.ones(y1.shape, dtype=bool) if known1 is None else np.asarray(known1, dtype=bool)
        k2 = np.ones(y2.shape, dtype=bool) if known2 is None else np.asarray(known2, dtype=bool)
        known = k1 & k2
    return MixedBatch(x=x.astype(x1.dtype), y=y.astype(y1.dtype), known=known, lam=lam)

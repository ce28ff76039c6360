"""Desk-scale multi-label tagging data with planted local class patterns.

Class c is a fixed zero-mean p×p template at frequency row `rows[c]`,
stamped at uniformly random time positions of every clip labelled c. The
background is white noise over a smooth random field.

The train split also carries a confounder: with probability
`context_correlation` a positive clip gets its class's fixed smooth global
field added. On the test split that field is replaced by a fresh random
field with the same statistics, the noise is scaled by `test_noise_scale`
and the background is shifted by `test_offset`. Only the local template
evidence survives the move from train to test.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, Field, model_validator
from scipy.ndimage import gaussian_filter
from scipy.stats import rankdata

from rfshake.errors import ArgumentError
from .dataset import TaggingDataset, TaggingSplit


class SyntheticConfig(BaseModel):
    n_classes: int = Field(default=4, ge=1)
    pattern_size: int = Field(default=5, ge=1)
    n_bins: int = Field(default=64, ge=1)
    n_frames: int = Field(default=128, ge=1)
    n_train: int = Field(default=256, ge=0)
    n_test: int = Field(default=128, ge=0)
    density: float = Field(default=0.3, gt=0.0, lt=1.0)
    max_instances: int = Field(default=2, ge=1)
    pattern_amplitude: float = 2.0
    noise_std: float = Field(default=1.0, ge=0.0)
    background_strength: float = 0.5
    background_sigma: float = 3.0
    context_strength: float = 1.0
    context_sigma: float = 6.0
    context_correlation: float = Field(default=0.9, ge=0.0, le=1.0)
    test_noise_scale: float = Field(default=1.5, gt=0.0)
    test_offset: float = 0.5
    seed: int = 0

    @model_validator(mode='after')
    def _check_pattern_fits(self) -> 'SyntheticConfig':
        if self.pattern_size > min(self.n_bins, self.n_frames):
            raise ValueError(
                f"pattern_size {self.pattern_size} exceeds the spectrogram extent {self.n_bins}×{self.n_frames}"
            )
        return self


@dataclass
class SyntheticTaggingDataset(TaggingDataset):
    templates: Optional[np.ndarray] = None
    """[n_classes, p, p]"""
    rows: Optional[np.ndarray] = None
    """[n_classes] top frequency row of each class's template"""


def make_templates(n_classes: int, pattern_size: int, rng: np.random.Generator) -> np.ndarray:
    templates = rng.choice([-1.0, 1.0], size=(n_classes, pattern_size, pattern_size))
    return templates - templates.mean(axis=(1, 2), keepdims=True)


def template_rows(n_classes: int, pattern_size: int, n_bins: int) -> np.ndarray:
    return np.linspace(0, n_bins - pattern_size, n_classes).round().astype(np.int64)


def _smooth_field(rng: np.random.Generator, shape: Tuple[int, int], sigma: float) -> np.ndarray:
    field = gaussian_filter(rng.standard_normal(shape), sigma=sigma, mode='wrap')
    return field / max(field.std(), 1e-12)


def _sample(
    rng: np.random.Generator,
    cfg: SyntheticConfig,
    templates: np.ndarray,
    rows: np.ndarray,
    contexts: np.ndarray,
    held_out: bool,
) -> Tuple[np.ndarray, np.ndarray]:
    shape = (cfg.n_bins, cfg.n_frames)
    p = cfg.pattern_size
    labels = (rng.random(cfg.n_classes) < cfg.density).astype(np.float32)

    noise_std = cfg.noise_std * (cfg.test_noise_scale if held_out else 1.0)
    spec = noise_std * rng.standard_normal(shape)
    spec += cfg.background_strength * _smooth_field(rng, shape, cfg.background_sigma)
    if held_out:
        spec += cfg.test_offset

    for c in np.flatnonzero(labels):
        if rng.random() < cfg.context_correlation:
            context = _smooth_field(rng, shape, cfg.context_sigma) if held_out else contexts[c]
            spec += cfg.context_strength * context
        for _ in range(int(rng.integers(1, cfg.max_instances + 1))):
            t = int(rng.integers(0, cfg.n_frames - p + 1))
            spec[rows[c]:rows[c] + p, t:t + p] += cfg.pattern_amplitude * templates[c]
    return spec.astype(np.float32), labels


def _split(
    seq: np.random.SeedSequence,
    n: int,
    cfg: SyntheticConfig,
    templates: np.ndarray,
    rows: np.ndarray,
    contexts: np.ndarray,
    held_out: bool,
    prefix: str,
) -> TaggingSplit:
    if n == 0:
        return TaggingSplit.empty(cfg.n_bins, cfg.n_frames, cfg.n_classes)

    xs: List[np.ndarray] = []
    ys: List[np.ndarray] = []
    for child in seq.spawn(n):
        x, y = _sample(np.random.default_rng(child), cfg, templates, rows, contexts, held_out)
        xs.append(x)
        ys.append(y)
    y = np.stack(ys)
    return TaggingSplit(
        x=np.stack(xs), y=y, known=np.ones(y.shape, dtype=bool),
        ids=[f"{prefix}-{i:05d}" for i in range(n)],
    )


def generate_synthetic(cfg: SyntheticConfig) -> SyntheticTaggingDataset:
    template_seq, context_seq, train_seq, test_seq = np.random.SeedSequence(cfg.seed).spawn(4)
    templates = make_templates(cfg.n_classes, cfg.pattern_size, np.random.default_rng(template_seq))
    rows = template_rows(cfg.n_classes, cfg.pattern_size, cfg.n_bins)

    context_rng = np.random.default_rng(context_seq)
    contexts = np.stack([
        _smooth_field(context_rng, (cfg.n_bins, cfg.n_frames), cfg.context_sigma)
        for _ in range(cfg.n_classes)
    ])

    train = _split(train_seq, cfg.n_train, cfg, templates, rows, contexts, False, "train")
    test = _split(test_seq, cfg.n_test, cfg, templates, rows, contexts, True, "test")
    logger.info(
        f"Generated synthetic dataset: {cfg.n_train} train / {cfg.n_test} test, "
        f"{cfg.n_classes} classes, {cfg.n_bins}×{cfg.n_frames}"
    )
    return SyntheticTaggingDataset(
        train=train, test=test,
        metadata={'source': 'synthetic', 'seed': cfg.seed},
        templates=templates, rows=rows,
    )


def matched_filter_scores(split: TaggingSplit, templates: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Rank-scaled max template correlation per (sample, class), in [0, 1]."""
    n_classes, p, _ = templates.shape
    if split.n_classes != n_classes:
        raise ArgumentError(f"{n_classes} templates for a {split.n_classes}-class split")
    n = len(split)
    scores = np.zeros((n, n_classes))
    if n == 0:
        return scores

    for c in range(n_classes):
        band = split.x[:, rows[c]:rows[c] + p, :].astype(np.float64)
        windows = sliding_window_view(band, (p, p), axis=(1, 2))[:, 0]
        response = np.einsum('ntij,ij->nt', windows, templates[c]).max(axis=1)
        ranks = rankdata(response)
        scores[:, c] = (ranks - 1) / max(n - 1, 1)
    return scores

"""Log-mel spectrogram front-end, per-bin normalization and time cropping."""
from dataclasses import dataclass
from typing import Optional

import librosa
import numpy as np
from loguru import logger
from pydantic import BaseModel, field_validator, model_validator

from rfshake.errors import ArgumentError, DimensionError

STD_FLOOR = 1e-6
AMPLITUDE_FLOOR = 1e-10


class SpectrogramConfig(BaseModel):
    n_mels: int = 256
    window_size: int = 2048
    overlap: float = 0.75
    """0.75 for short clips, 0.25 for long clips"""
    sample_rate: int = 22050
    log_compress: bool = True
    fmin: float = 0.0
    fmax: Optional[float] = None

    @field_validator('overlap')
    @classmethod
    def _check_overlap(cls, overlap: float) -> float:
        if not 0.0 <= overlap < 1.0:
            raise ValueError(f"overlap must lie in [0, 1), got {overlap}")
        return overlap

    @model_validator(mode='after')
    def _check_hop(self) -> 'SpectrogramConfig':
        hop = self.window_size * (1.0 - self.overlap)
        if hop < 1 or abs(hop - round(hop)) > 1e-9:
            raise ValueError(
                f"window_size·(1 − overlap) = {hop} must be a positive integer"
            )
        return self

    @property
    def hop_length(self) -> int:
        return int(round(self.window_size * (1.0 - self.overlap)))

    def n_frames(self, n_samples: int) -> int:
        return (n_samples - self.window_size) // self.hop_length + 1


def compute_mel_spectrogram(waveform: np.ndarray, cfg: SpectrogramConfig) -> np.ndarray:
    """Magnitude STFT → mel filterbank → optional dB compression.

    Returns:
        np.ndarray: shape [n_mels, n_frames], n_frames = ⌊(len − window)/hop⌋ + 1.
    """
    waveform = np.ascontiguousarray(np.asarray(waveform, dtype=np.float64))
    if waveform.ndim != 1:
        raise DimensionError(f"expected a mono waveform, got shape {waveform.shape}")
    if waveform.shape[0] < cfg.window_size:
        raise ArgumentError(
            f"waveform has {waveform.shape[0]} samples, fewer than the window size {cfg.window_size}"
        )

    magnitude = np.abs(librosa.stft(
        waveform, n_fft=cfg.window_size, hop_length=cfg.hop_length, center=False,
    ))
    mel_basis = librosa.filters.mel(
        sr=cfg.sample_rate, n_fft=cfg.window_size, n_mels=cfg.n_mels, fmin=cfg.fmin, fmax=cfg.fmax,
    )
    mel = mel_basis @ magnitude
    if cfg.log_compress:
        mel = librosa.amplitude_to_db(mel, ref=1.0, amin=AMPLITUDE_FLOOR, top_db=None)
    return mel.astype(np.float32)


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray


def compute_normalization_stats(train_specs: np.ndarray) -> NormalizationStats:
    """Per-bin mean and std of a stack of training spectrograms [N, n_bins, n_frames]."""
    specs = np.asarray(train_specs, dtype=np.float64)
    if specs.ndim == 2:
        specs = specs[None]
    if specs.ndim != 3 or specs.shape[0] == 0:
        raise DimensionError(f"expected a non-empty [N, bins, frames] stack, got {specs.shape}")

    mean = specs.mean(axis=(0, 2))
    std = np.maximum(specs.std(axis=(0, 2)), STD_FLOOR)
    logger.debug(f"Normalization stats over {specs.shape[0]} training spectrograms")
    return NormalizationStats(mean=mean, std=std)


def normalize(spec: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    spec = np.asarray(spec)
    if spec.shape[-2] != stats.mean.shape[0]:
        raise DimensionError(f"spectrogram has {spec.shape[-2]} bins, stats have {stats.mean.shape[0]}")
    out = (spec - stats.mean[:, None]) / stats.std[:, None]
    return out.astype(spec.dtype if np.issubdtype(spec.dtype, np.floating) else np.float32)


def random_crop(spec: np.ndarray, crop_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Contiguous slice of `crop_frames` frames with a uniformly drawn start."""
    n_frames = spec.shape[-1]
    if crop_frames < 1:
        raise ArgumentError(f"crop_frames must be ≥ 1, got {crop_frames}")
    if n_frames < crop_frames:
        raise ArgumentError(f"clip has {n_frames} frames, shorter than the crop of {crop_frames}")
    start = int(rng.integers(0, n_frames - crop_frames + 1))
    return spec[..., start:start + crop_frames]

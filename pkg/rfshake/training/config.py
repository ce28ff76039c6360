from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator


class TrainConfig(BaseModel):
    """Optimization protocol: Adam with a constant learning rate, optional mixup.

    The defaults for `learning_rate`, `batch_size` and `mixup_concentration`
    are configuration choices; set `mixup_enabled: false` for soft-label
    datasets where mixup does not help.
    """
    epochs: int = Field(default=150, ge=1)
    batch_size: int = Field(default=16, ge=1)
    learning_rate: float = Field(default=1e-4, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    mixup_enabled: bool = True
    mixup_concentration: float = 0.2
    seed: int = 0
    eval_window: int = Field(default=10, ge=1)
    crop_frames: Optional[int] = Field(default=None, ge=1)
    checkpoint_every: int = Field(default=10, ge=0)
    """0 disables periodic checkpoints; the final epoch is always written"""
    prefetch: int = Field(default=2, ge=1)
    dtype: Literal['float32', 'float64'] = 'float32'
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0)

    @model_validator(mode='after')
    def _check_protocol(self) -> 'TrainConfig':
        if self.eval_window > self.epochs:
            raise ValueError(f"eval_window ({self.eval_window}) must not exceed epochs ({self.epochs})")
        if self.mixup_enabled and self.mixup_concentration <= 0:
            raise ValueError("mixup_concentration must be > 0 when mixup is enabled")
        return self

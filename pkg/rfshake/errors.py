"""Exception types raised across the package."""
from typing import Optional


class RFShakeError(Exception):
    """Base class of every error raised by `rfshake`."""


class ArgumentError(RFShakeError, ValueError):
    """An argument is outside its documented range."""


class DimensionError(RFShakeError, ValueError):
    """Tensor shapes do not line up."""


class DegenerateBatchError(RFShakeError, ValueError):
    """Batch statistics are undefined (fewer than two values per channel)."""


class EmptyLossError(RFShakeError, ValueError):
    """Every (sample, label) pair is masked out."""


class ClippedReceptiveFieldError(RFShakeError, ValueError):
    """The probe input is too small to contain the whole receptive field."""


class NoSolutionError(RFShakeError, ValueError):
    """An inverse lookup has no admissible answer."""


class ContractError(RFShakeError, RuntimeError):
    """A caller broke an operation's contract (e.g. random mixing in eval mode)."""


class UndefinedClassError(RFShakeError, ValueError):
    """A class has no known positives (or negatives) so its metric is undefined."""


class MetricError(RFShakeError, ValueError):
    """A macro metric could not be computed for any class."""


class ContainerFormatError(RFShakeError, ValueError):
    """A binary container (checkpoint or dataset) is malformed."""


class ConfigError(RFShakeError, ValueError):
    """A configuration file or object failed validation."""


class TrainingDivergedError(RFShakeError, RuntimeError):
    """Loss or gradients became non-finite."""

    def __init__(self, message: str, epoch: Optional[int] = None, step: Optional[int] = None) -> None:
        self.epoch = epoch
        self.step = step
        where = []
        if epoch is not None:
            where.append(f"epoch={epoch}")
        if step is not None:
            where.append(f"step={step}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)

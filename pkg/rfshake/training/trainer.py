from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel
from typing_extensions import TypedDict

from rfshake.architectures import ModelState
from rfshake.data import TaggingDataset, TaggingSplit
from rfshake.errors import ArgumentError, TrainingDivergedError
from rfshake.metrics import MetricsReport, PredictionSet, evaluate_predictions
from rfshake.tensor_engine import Mode, Tensor, bce_with_logits, no_grad, sigmoid
from .checkpoint import save_checkpoint
from .config import TrainConfig
from .optimizer import adam_step
from .pipeline import BatchPipeline, augment_rng

EPOCH_METRICS = ("train_loss", "test_loss", "macro_pr_auc", "f1_classical", "f1_posneg")


class EpochRecord(TypedDict):
    epoch: int
    train_loss: float
    test_loss: float
    macro_pr_auc: float
    f1_classical: float
    f1_posneg: float


class TrainReport(BaseModel):
    history: List[EpochRecord]
    window_mean: Dict[str, float]
    window_std: Dict[str, float]
    eval_window: int
    final_metrics: MetricsReport
    checkpoints: List[str] = []

    @property
    def final(self) -> EpochRecord:
        return self.history[-1]


def window_summary(history: List[EpochRecord], eval_window: int) -> Tuple[Dict[str, float], Dict[str, float]]:
    """Mean and (population) std of every metric over the last `eval_window` epochs."""
    window = history[-eval_window:]
    mean = {name: float(np.mean([r[name] for r in window])) for name in EPOCH_METRICS}
    std = {name: float(np.std([r[name] for r in window])) for name in EPOCH_METRICS}
    return mean, std


def evaluate(model: ModelState, split: TaggingSplit, batch_size: int = 32, threshold: float = 0.5) -> Tuple[float, MetricsReport]:
    """Masked BCE and metrics in eval mode; running statistics stay untouched."""
    if len(split) == 0:
        raise ArgumentError("cannot evaluate on an empty split")

    chunks = []
    with no_grad():
        for start in range(0, len(split), batch_size):
            x = split.x[start:start + batch_size][:, None]
            chunks.append(model.forward(x, Mode.EVAL).data)
        logits = Tensor(np.concatenate(chunks).astype(np.float64))
        loss = bce_with_logits(logits, split.y, split.known).item()
        scores = sigmoid(logits).data

    report = evaluate_predictions(PredictionSet.from_arrays(scores, split.y, split.known), threshold)
    return float(loss), report


def train(
    model: ModelState,
    dataset: TaggingDataset,
    cfg: TrainConfig,
    checkpoint_dir: Optional[Union[str, Path]] = None,
    on_epoch: Optional[Callable[[EpochRecord, MetricsReport], None]] = None,
) -> TrainReport:
    """Run `cfg.epochs` epochs of Adam on the train split, evaluating the test split after each.

    Args:
        model: updated in place.
        dataset: train and test splits; neither may be empty.
        cfg: optimization protocol.
        checkpoint_dir: where `epoch_XXX.rfcnn` files go; None disables checkpoints.
        on_epoch: called with each epoch's record and metrics report.

    Returns:
        TrainReport: per-epoch history plus mean ± std over the last `cfg.eval_window` epochs.
    """
    if len(dataset.train) == 0 or len(dataset.test) == 0:
        raise ArgumentError(f"train ({len(dataset.train)}) and test ({len(dataset.test)}) splits must be non-empty")

    rng = augment_rng(cfg.seed)
    history: List[EpochRecord] = []
    checkpoints: List[str] = []
    report: Optional[MetricsReport] = None

    for epoch in range(1, cfg.epochs + 1):
        total, count = 0.0, 0
        for batch in BatchPipeline(dataset.train, cfg, rng):
            model.zero_grad()
            loss = bce_with_logits(model.forward(batch.x, Mode.TRAIN), batch.y, batch.known)
            value = loss.item()
            if not np.isfinite(value):
                logger.error(f"Loss became {value} at epoch {epoch}, step {model.step_count + 1}")
                raise TrainingDivergedError("non-finite training loss", epoch=epoch, step=model.step_count + 1)
            loss.backward()
            try:
                adam_step(model, model.gradients(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
            except TrainingDivergedError as e:
                raise TrainingDivergedError(str(e), epoch=epoch, step=e.step) from e
            total += value * len(batch.x)
            count += len(batch.x)

        test_loss, report = evaluate(model, dataset.test, cfg.batch_size, cfg.threshold)
        record = EpochRecord(
            epoch=epoch,
            train_loss=total / count,
            test_loss=test_loss,
            macro_pr_auc=report.macro_pr_auc,
            f1_classical=report.macro_f1_classical,
            f1_posneg=report.macro_f1_posneg,
        )
        history.append(record)
        logger.info(
            f"epoch {epoch}/{cfg.epochs} train_loss={record['train_loss']:.4f} "
            f"test_loss={test_loss:.4f} pr_auc={report.macro_pr_auc:.4f}"
        )
        if on_epoch is not None:
            on_epoch(record, report)

        periodic = cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0
        if checkpoint_dir is not None and (periodic or epoch == cfg.epochs):
            path = save_checkpoint(Path(checkpoint_dir) / f"epoch_{epoch:03d}.rfcnn", model)
            checkpoints.append(str(path))

    mean, std = window_summary(history, cfg.eval_window)
    return TrainReport(
        history=history, window_mean=mean, window_std=std, eval_window=cfg.eval_window,
        final_metrics=report, checkpoints=checkpoints,
    )

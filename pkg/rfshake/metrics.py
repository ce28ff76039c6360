"""Multi-label evaluation: macro PR-AUC and two F-score conventions.

PR-AUC is average precision, Σ_k (R_k − R_{k−1})·P_k over the distinct score
thresholds, so tied scores form one rank group. The classical F-score is the
F1 of the positive class; the pos/neg variant averages the F1 of the
positive and of the negative class. All three are macro averages over the
classes that have at least one known positive and one known negative.
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel
from sklearn.metrics import average_precision_score, f1_score
from typing_extensions import TypedDict

from rfshake.errors import ArgumentError, DimensionError, MetricError, UndefinedClassError

DEFAULT_THRESHOLD = 0.5
METRIC_NAMES = ("macro_pr_auc", "f1_classical", "f1_posneg")


@dataclass(frozen=True)
class PredictionSet:
    scores: np.ndarray
    """[n_samples, n_classes] probabilities"""
    labels: np.ndarray
    """[n_samples, n_classes] in {0, 1}"""
    known: np.ndarray
    """[n_samples, n_classes] True where the label is known"""

    @classmethod
    def from_arrays(cls,
        scores: np.ndarray,
        labels: np.ndarray,
        known: Optional[np.ndarray] = None,
    ) -> 'PredictionSet':
        scores = np.asarray(scores, dtype=np.float64)
        if scores.ndim == 1:
            scores = scores[:, None]
        labels = np.asarray(labels, dtype=np.float64)
        if labels.ndim == 1:
            labels = labels[:, None]
        known = np.ones(labels.shape, dtype=bool) if known is None else np.asarray(known, dtype=bool)
        if known.ndim == 1:
            known = known[:, None]

        if not (scores.shape == labels.shape == known.shape):
            raise DimensionError(
                f"scores {scores.shape}, labels {labels.shape} and mask {known.shape} must match"
            )
        if np.any(scores < 0) or np.any(scores > 1) or not np.all(np.isfinite(scores)):
            raise ArgumentError("scores must be probabilities in [0, 1]")
        # soft labels count as positive from 0.5 up
        return cls(scores=scores, labels=(labels >= 0.5).astype(np.int64), known=known)

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def column(self, c: int):
        keep = self.known[:, c]
        return self.scores[keep, c], self.labels[keep, c]


class MetricsReport(BaseModel):
    per_class_ap: List[Optional[float]]
    macro_pr_auc: float
    macro_f1_classical: float
    macro_f1_posneg: float
    threshold: float
    classes_used: List[int]

    def value(self, metric_name: str) -> float:
        return {
            "macro_pr_auc": self.macro_pr_auc,
            "f1_classical": self.macro_f1_classical,
            "f1_posneg": self.macro_f1_posneg,
        }[metric_name]


class MetricsRow(TypedDict):
    run_id: str
    epoch: int
    rf: int
    arch: str
    metric_name: str
    value: float


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise DimensionError(f"scores {scores.shape} and labels {labels.shape} differ")
    if not np.any(labels == 1):
        raise UndefinedClassError("average precision is undefined without a positive label")
    return float(average_precision_score(labels.astype(np.int64), scores))


def defined_classes(preds: PredictionSet) -> List[int]:
    """Classes with at least one known positive and one known negative."""
    used = []
    for c in range(preds.n_classes):
        _, labels = preds.column(c)
        if np.any(labels == 1) and np.any(labels == 0):
            used.append(c)
        else:
            logger.warning(f"Class {c} has no known positive or no known negative; excluded from macro metrics")
    return used


def _require(classes: List[int]) -> List[int]:
    if not classes:
        raise MetricError("no class has both known positives and known negatives")
    return classes


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold < 1.0:
        raise ArgumentError(f"threshold must lie in (0, 1), got {threshold}")


def per_class_average_precision(preds: PredictionSet) -> List[Optional[float]]:
    used = set(defined_classes(preds))
    return [
        average_precision(*preds.column(c)) if c in used else None
        for c in range(preds.n_classes)
    ]


def macro_pr_auc(preds: PredictionSet) -> float:
    classes = _require(defined_classes(preds))
    return float(np.mean([average_precision(*preds.column(c)) for c in classes]))


def f1_classical(preds: PredictionSet, threshold: float = DEFAULT_THRESHOLD) -> float:
    _check_threshold(threshold)
    classes = _require(defined_classes(preds))
    scores = []
    for c in classes:
        probs, labels = preds.column(c)
        scores.append(f1_score(labels, (probs >= threshold).astype(np.int64), zero_division=0))
    return float(np.mean(scores))


def f1_posneg(preds: PredictionSet, threshold: float = DEFAULT_THRESHOLD) -> float:
    _check_threshold(threshold)
    classes = _require(defined_classes(preds))
    scores = []
    for c in classes:
        probs, labels = preds.column(c)
        both = f1_score(
            labels, (probs >= threshold).astype(np.int64),
            labels=[0, 1], average=None, zero_division=0,
        )
        scores.append(float(np.mean(both)))
    return float(np.mean(scores))


def evaluate_predictions(preds: PredictionSet, threshold: float = DEFAULT_THRESHOLD) -> MetricsReport:
    classes = _require(defined_classes(preds))
    return MetricsReport(
        per_class_ap=per_class_average_precision(preds),
        macro_pr_auc=macro_pr_auc(preds),
        macro_f1_classical=f1_classical(preds, threshold),
        macro_f1_posneg=f1_posneg(preds, threshold),
        threshold=threshold,
        classes_used=classes,
    )


def metrics_rows(report: MetricsReport, run_id: str, epoch: int, rf: int, arch: str) -> List[MetricsRow]:
    """Long-format CSV rows: one per macro metric, then one per defined class AP."""
    rows = [
        MetricsRow(run_id=run_id, epoch=epoch, rf=rf, arch=arch, metric_name=name, value=report.value(name))
        for name in METRIC_NAMES
    ]
    for c, ap in enumerate(report.per_class_ap):
        if ap is not None:
            rows.append(MetricsRow(
                run_id=run_id, epoch=epoch, rf=rf, arch=arch, metric_name=f"ap_class{c}", value=ap,
            ))
    return rows

import numpy as np
import pytest
from loguru import logger

from rfshake.errors import ArgumentError, DimensionError, MetricError, UndefinedClassError
from rfshake.metrics import (
    METRIC_NAMES, PredictionSet, average_precision, defined_classes, evaluate_predictions, f1_classical,
    f1_posneg, macro_pr_auc, metrics_rows, per_class_average_precision,
)


def brute_force_ap(scores: np.ndarray, labels: np.ndarray) -> float:
    """Σ (R_k − R_{k−1})·P_k over every distinct threshold, highest first."""
    n_pos = labels.sum()
    ap, prev_recall = 0.0, 0.0
    for t in sorted(set(scores.tolist()), reverse=True):
        predicted = scores >= t
        tp = np.sum(predicted & (labels == 1))
        precision = tp / predicted.sum()
        recall = tp / n_pos
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return float(ap)


def average_precision_examples_test() -> None:
    assert average_precision([0.9, 0.8, 0.3], [1, 0, 1]) == pytest.approx(5 / 6)
    assert average_precision([0.9, 0.8, 0.3], [1, 1, 0]) == pytest.approx(1.0)
    assert average_precision([0.1, 0.2, 0.3], [1, 0, 0]) == pytest.approx(1 / 3)
    # one tied group: precision at the only threshold is the positive rate
    assert average_precision([0.5, 0.5, 0.5, 0.5], [1, 0, 0, 1]) == pytest.approx(0.5)


def average_precision_matches_brute_force_test() -> None:
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, size=n)
        labels[rng.integers(n)] = 1
        # coarse rounding forces ties
        scores = np.round(rng.random(n), int(rng.integers(1, 4)))
        assert abs(average_precision(scores, labels) - brute_force_ap(scores, labels)) < 1e-9


def average_precision_rank_invariant_test() -> None:
    rng = np.random.default_rng(1)
    for _ in range(50):
        labels = rng.integers(0, 2, size=30)
        labels[0] = 1
        scores = np.round(rng.random(30), 2)
        for transformed in (scores ** 3 + scores, np.exp(4 * scores) - 7, 1 / (1 + np.exp(-10 * (scores - 0.5)))):
            assert average_precision(transformed, labels) == pytest.approx(average_precision(scores, labels), abs=1e-12)


def random_scores_average_precision_is_prior_test() -> None:
    rng = np.random.default_rng(2)
    n, prior = 20_000, 0.3
    labels = (rng.random(n) < prior).astype(np.int64)
    ap = average_precision(rng.random(n), labels)
    # sampling spread of AP is about sqrt(prior / n) ≈ 0.004
    assert ap == pytest.approx(labels.mean(), abs=0.02)


def average_precision_errors_test() -> None:
    with pytest.raises(UndefinedClassError):
        average_precision([0.2, 0.4], [0, 0])
    with pytest.raises(DimensionError):
        average_precision([0.2, 0.4], [0, 1, 1])


def f1_examples_test() -> None:
    # TP=1, FP=1, FN=0, TN=2
    preds = PredictionSet.from_arrays([0.9, 0.7, 0.2, 0.1], [1, 0, 0, 0])
    assert f1_classical(preds) == pytest.approx(2 / 3)
    assert f1_posneg(preds) == pytest.approx(11 / 15)


def f1_zero_division_test() -> None:
    preds = PredictionSet.from_arrays([0.1, 0.2, 0.3], [1, 0, 0])
    assert f1_classical(preds) == 0.0
    assert f1_posneg(preds) == pytest.approx((0.0 + 0.8) / 2)


def f1_posneg_symmetric_predictor_test() -> None:
    labels = np.array([1, 1, 0, 0, 1, 0])
    scores = np.array([0.9, 0.2, 0.1, 0.8, 0.7, 0.3])
    preds = PredictionSet.from_arrays(scores, labels)
    flipped = PredictionSet.from_arrays(1 - scores, 1 - labels)
    assert f1_posneg(preds) == pytest.approx(f1_classical(preds))
    assert f1_classical(preds) == pytest.approx(f1_classical(flipped))


def threshold_is_inclusive_test() -> None:
    preds = PredictionSet.from_arrays([0.5, 0.4], [1, 0])
    assert f1_classical(preds, threshold=0.5) == 1.0
    assert f1_classical(preds, threshold=0.4) == pytest.approx(2 / 3)
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(ArgumentError):
            f1_classical(preds, threshold=bad)


def unknown_labels_are_ignored_test() -> None:
    rng = np.random.default_rng(1)
    scores = rng.random((30, 3))
    labels = (rng.random((30, 3)) < 0.4).astype(float)
    labels[:3] = [1, 1, 1]
    labels[3:6] = [0, 0, 0]
    known = np.ones((30, 3), dtype=bool)
    known[10:20, 1] = False

    masked = evaluate_predictions(PredictionSet.from_arrays(scores, labels, known))
    # whatever sits behind the mask must not matter
    scrambled_scores, scrambled_labels = scores.copy(), labels.copy()
    scrambled_scores[10:20, 1] = rng.random(10)
    scrambled_labels[10:20, 1] = 1 - labels[10:20, 1]
    scrambled = evaluate_predictions(PredictionSet.from_arrays(scrambled_scores, scrambled_labels, known))
    assert masked == scrambled

    keep = known[:, 1]
    assert masked.per_class_ap[1] == pytest.approx(average_precision(scores[keep, 1], labels[keep, 1]))


def undefined_classes_excluded_test() -> None:
    scores = np.array([[0.9, 0.3], [0.2, 0.8], [0.6, 0.1]])
    labels = np.array([[1, 0], [0, 0], [1, 0]])
    preds = PredictionSet.from_arrays(scores, labels)
    assert defined_classes(preds) == [0]
    assert per_class_average_precision(preds) == [1.0, None]
    assert macro_pr_auc(preds) == 1.0

    report = evaluate_predictions(preds)
    assert report.classes_used == [0]
    rows = metrics_rows(report, run_id="abc", epoch=3, rf=23, arch="cp_resnet")
    assert [r["metric_name"] for r in rows] == list(METRIC_NAMES) + ["ap_class0"]
    assert all(r["epoch"] == 3 and r["rf"] == 23 for r in rows)


def class_without_positives_is_logged_test() -> None:
    messages = []
    sink_id = logger.add(messages.append, level="WARNING", format="{message}")
    try:
        scores = np.array([[0.9, 0.3, 0.4], [0.2, 0.8, 0.1], [0.6, 0.1, 0.7]])
        labels = np.array([[1, 0, 1], [0, 0, 0], [0, 0, 1]])
        report = evaluate_predictions(PredictionSet.from_arrays(scores, labels))
    finally:
        logger.remove(sink_id)

    assert report.classes_used == [0, 2]
    assert report.macro_pr_auc == pytest.approx((1.0 + 1.0) / 2)
    assert any("Class 1" in str(m) and "excluded" in str(m) for m in messages)
    assert not any("Class 0" in str(m) or "Class 2" in str(m) for m in messages)


def soft_labels_binarized_test() -> None:
    preds = PredictionSet.from_arrays([0.9, 0.1, 0.6], [0.7, 0.3, 0.5])
    np.testing.assert_array_equal(preds.labels[:, 0], [1, 0, 1])


def no_defined_class_test() -> None:
    preds = PredictionSet.from_arrays([[0.3, 0.4]], [[1, 0]])
    with pytest.raises(MetricError):
        macro_pr_auc(preds)
    with pytest.raises(MetricError):
        evaluate_predictions(preds)


def bad_inputs_test() -> None:
    with pytest.raises(DimensionError):
        PredictionSet.from_arrays(np.zeros((3, 2)), np.zeros((3, 1)))
    with pytest.raises(ArgumentError):
        PredictionSet.from_arrays([1.2, 0.3], [1, 0])
    with pytest.raises(ArgumentError):
        PredictionSet.from_arrays([np.nan, 0.3], [1, 0])


if __name__ == '__main__':
    run_test = lambda test_no: [
        average_precision_examples_test,
        average_precision_matches_brute_force_test,
        f1_examples_test,
    ][test_no - 1].__call__()

    run_test(test_no=2)

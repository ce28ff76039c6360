from typing import Dict

import numpy as np
import pytest

from rfshake.architectures import build_cp_resnet
from rfshake.data import SyntheticConfig, TaggingDataset, TaggingSplit, generate_synthetic
from rfshake.errors import ArgumentError, DimensionError, TrainingDivergedError
from rfshake.tensor_engine import Tensor
from rfshake.training import (
    BatchPipeline, EpochRecord, TrainConfig, adam_step, augment_rng, evaluate, instantiate,
    make_batches, mixup_batch, sample_lambda, train, window_summary,
)


class ScalarState:
    """Just enough of a ModelState for `adam_step`."""

    def __init__(self, values: np.ndarray) -> None:
        self.parameters: Dict[str, Tensor] = {"theta": Tensor(values.copy(), requires_grad=True)}
        self.adam_m = {"theta": np.zeros_like(values)}
        self.adam_v = {"theta": np.zeros_like(values)}
        self.step_count = 0

    @property
    def theta(self) -> np.ndarray:
        return self.parameters["theta"].data


def tiny_dataset(seed: int = 0) -> TaggingDataset:
    return generate_synthetic(SyntheticConfig(
        n_classes=2, n_bins=16, n_frames=32, n_train=32, n_test=16, density=0.5, seed=seed,
    ))


def tiny_model(seed: int = 0):
    return instantiate(build_cp_resnet(1, n_classes=2, width_multiplier=1 / 32), seed=seed)


def adam_first_step_test() -> None:
    state = ScalarState(np.zeros(3, dtype=np.float32))
    adam_step(state, {"theta": np.array([0.3, -2.0, 5.0], dtype=np.float32)}, lr=0.1)
    np.testing.assert_allclose(state.theta, [-0.1, 0.1, -0.1], atol=1e-7)
    assert state.step_count == 1


def adam_matches_scalar_recursion_test() -> None:
    rng = np.random.default_rng(0)
    grads = rng.normal(size=(6, 4))
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8

    state = ScalarState(np.ones(4))
    for g in grads:
        adam_step(state, {"theta": g}, lr, b1, b2, eps)

    for i in range(4):
        theta, m, v = 1.0, 0.0, 0.0
        for t, g in enumerate(grads[:, i], start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta -= lr * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)
        assert abs(state.theta[i] - theta) < 1e-12


def adam_zero_gradient_test() -> None:
    state = ScalarState(np.array([0.5, -1.5]))
    adam_step(state, {"theta": np.zeros(2)}, lr=0.1)
    np.testing.assert_array_equal(state.theta, [0.5, -1.5])


def adam_rejects_bad_gradients_test() -> None:
    state = ScalarState(np.array([0.5, -1.5]))
    with pytest.raises(TrainingDivergedError) as info:
        adam_step(state, {"theta": np.array([np.nan, 0.0])}, lr=0.1)
    assert info.value.step == 1
    np.testing.assert_array_equal(state.theta, [0.5, -1.5])
    assert state.step_count == 0

    with pytest.raises(DimensionError):
        adam_step(state, {"theta": np.zeros(3)}, lr=0.1)


def adam_minimizes_quadratic_test() -> None:
    state = ScalarState(np.array([1.0]))
    for _ in range(100):
        adam_step(state, {"theta": 2 * state.theta}, lr=0.1)
    assert abs(state.theta[0]) < 0.05


def mixup_endpoints_test() -> None:
    rng = np.random.default_rng(0)
    x1, x2 = rng.normal(size=(2, 3, 4)), rng.normal(size=(2, 3, 4))
    y1, y2 = np.array([[1.0, 0.0]] * 2), np.array([[0.0, 1.0]] * 2)

    same = mixup_batch(x1, y1, x2, y2, lam=1.0)
    np.testing.assert_array_equal(same.x, x1)
    np.testing.assert_array_equal(same.y, y1)
    assert same.known is None

    half = mixup_batch(x1, y1, x2, y2, lam=0.5)
    np.testing.assert_allclose(half.x, (x1 + x2) / 2)
    np.testing.assert_allclose(half.y, 0.5)


def mixup_known_mask_test() -> None:
    y = np.zeros((1, 3))
    mixed = mixup_batch(
        np.zeros((1, 2)), y, np.ones((1, 2)), y, lam=0.3,
        known1=np.array([[True, False, True]]), known2=np.array([[True, True, False]]),
    )
    np.testing.assert_array_equal(mixed.known, [[True, False, False]])


def mixup_lambda_distribution_test() -> None:
    rng = np.random.default_rng(0)
    draws = np.array([sample_lambda(rng, 0.2) for _ in range(10_000)])
    assert np.all((draws >= 0) & (draws <= 1))
    assert abs(draws.mean() - 0.5) < 0.02
    # Beta(0.2, 0.2) piles its mass near the ends
    assert np.mean((draws < 0.1) | (draws > 0.9)) > 0.5


def mixup_errors_test() -> None:
    x, y = np.zeros((2, 3)), np.zeros((2, 1))
    with pytest.raises(ArgumentError):
        mixup_batch(x, y, x, y, lam=1.5)
    with pytest.raises(ArgumentError):
        mixup_batch(x, y, x, y)
    with pytest.raises(ArgumentError):
        mixup_batch(x, y, x, y, rng=np.random.default_rng(0), concentration=0.0)
    with pytest.raises(DimensionError):
        mixup_batch(x, y, np.zeros((2, 4)), y, lam=0.5)


def window_summary_test() -> None:
    history = [
        EpochRecord(epoch=e, train_loss=0.5, test_loss=0.25, macro_pr_auc=0.75, f1_classical=0.5, f1_posneg=0.5)
        for e in range(1, 6)
    ]
    mean, std = window_summary(history, 3)
    assert mean["train_loss"] == 0.5 and mean["macro_pr_auc"] == 0.75
    assert all(value == 0.0 for value in std.values())

    history[-1]["test_loss"] = 1.0
    mean, std = window_summary(history, 2)
    assert mean["test_loss"] == pytest.approx(0.625)
    assert std["test_loss"] == pytest.approx(0.375)


def train_config_validation_test() -> None:
    with pytest.raises(ValueError):
        TrainConfig(epochs=3, eval_window=5)
    with pytest.raises(ValueError):
        TrainConfig(mixup_enabled=True, mixup_concentration=0.0)
    assert TrainConfig(mixup_enabled=False, mixup_concentration=0.0).mixup_enabled is False


def pipeline_is_deterministic_test() -> None:
    split = tiny_dataset().train
    cfg = TrainConfig(epochs=1, eval_window=1, batch_size=5, crop_frames=20, seed=7)

    threaded = BatchPipeline(split, cfg, augment_rng(cfg.seed), capacity=1).collect()
    inline = list(make_batches(split, cfg, augment_rng(cfg.seed)))
    assert len(threaded) == len(inline) == 7
    for a, b in zip(threaded, inline):
        assert a.x.shape[1:] == (1, 16, 20)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.known, b.known)


def pipeline_reraises_producer_errors_test() -> None:
    split = tiny_dataset().train
    cfg = TrainConfig(epochs=1, eval_window=1, crop_frames=64)
    with pytest.raises(ArgumentError):
        BatchPipeline(split, cfg, augment_rng(0)).collect()


def training_lowers_loss_test() -> None:
    cfg = TrainConfig(epochs=6, eval_window=2, batch_size=8, learning_rate=1e-2, mixup_enabled=False)
    report = train(tiny_model(), tiny_dataset(), cfg)
    assert len(report.history) == 6
    assert report.history[-1]["train_loss"] < report.history[0]["train_loss"]
    assert 0.0 <= report.final["macro_pr_auc"] <= 1.0
    assert report.window_mean["train_loss"] == pytest.approx(
        np.mean([r["train_loss"] for r in report.history[-2:]])
    )


def training_is_reproducible_test(tmp_path) -> None:
    cfg = TrainConfig(epochs=2, eval_window=1, batch_size=8, learning_rate=1e-3, checkpoint_every=1)
    first = train(tiny_model(3), tiny_dataset(), cfg, checkpoint_dir=tmp_path / "a")
    second = train(tiny_model(3), tiny_dataset(), cfg, checkpoint_dir=tmp_path / "b")
    assert first.history == second.history
    assert len(first.checkpoints) == 2
    assert (tmp_path / "a" / "epoch_002.rfcnn").read_bytes() == (tmp_path / "b" / "epoch_002.rfcnn").read_bytes()


def empty_split_rejected_test() -> None:
    dataset = tiny_dataset()
    empty = TaggingDataset(train=dataset.train, test=TaggingSplit.empty(16, 32, 2))
    with pytest.raises(ArgumentError):
        train(tiny_model(), empty, TrainConfig(epochs=1, eval_window=1))
    with pytest.raises(ArgumentError):
        evaluate(tiny_model(), empty.test)


def evaluate_keeps_running_stats_test() -> None:
    model = tiny_model()
    before = {k: v.copy() for k, v in model.buffers.items()}
    loss, report = evaluate(model, tiny_dataset().test)
    assert np.isfinite(loss) and loss > 0
    assert len(report.per_class_ap) == 2
    for name, value in model.buffers.items():
        np.testing.assert_array_equal(value, before[name])


if __name__ == '__main__':
    run_test = lambda test_no: [
        adam_first_step_test,
        mixup_endpoints_test,
        training_lowers_loss_test,
    ][test_no - 1].__call__()

    run_test(test_no=3)

import numpy as np
import pytest

from rfshake.architectures import build_ss_resnet, build_vgg
from rfshake.data import SyntheticConfig, generate_synthetic
from rfshake.errors import ContainerFormatError
from rfshake.tensor_engine import Mode
from rfshake.training import (
    CHECKPOINT_MAGIC, TrainConfig, checkpoint_bytes, instantiate, load_checkpoint, save_checkpoint, train,
)


@pytest.fixture(scope='module')
def trained_model():
    dataset = generate_synthetic(SyntheticConfig(
        n_classes=2, n_bins=16, n_frames=32, n_train=16, n_test=8, density=0.5,
    ))
    model = instantiate(build_ss_resnet(2, n_classes=2, width_multiplier=1 / 32), seed=1)
    train(model, dataset, TrainConfig(epochs=1, eval_window=1, batch_size=8, learning_rate=1e-3))
    return model, dataset


def round_trip_predictions_test(tmp_path, trained_model) -> None:
    model, dataset = trained_model
    path = save_checkpoint(tmp_path / "model.rfcnn", model)
    restored = load_checkpoint(path)

    x = dataset.test.x[:, None]
    np.testing.assert_array_equal(restored.forward(x, Mode.EVAL).data, model.forward(x, Mode.EVAL).data)
    assert restored.step_count == model.step_count == 2
    assert restored.arch_spec == model.arch_spec
    for name in model.adam_v:
        np.testing.assert_array_equal(restored.adam_m[name], model.adam_m[name])
        np.testing.assert_array_equal(restored.adam_v[name], model.adam_v[name])


def resave_is_byte_identical_test(tmp_path, trained_model) -> None:
    model, _ = trained_model
    path = save_checkpoint(tmp_path / "model.rfcnn", model)
    assert checkpoint_bytes(load_checkpoint(path)) == path.read_bytes()


def untrained_model_round_trip_test(tmp_path) -> None:
    model = instantiate(build_vgg(20, n_classes=3, width_multiplier=1 / 32), seed=0)
    restored = load_checkpoint(save_checkpoint(tmp_path / "vgg.rfcnn", model))
    assert restored.step_count == 0
    for name, tensor in model.parameters.items():
        np.testing.assert_array_equal(restored.parameters[name].data, tensor.data)
    for name, value in model.buffers.items():
        np.testing.assert_array_equal(restored.buffers[name], value)


def float64_model_loads_as_float32_test(tmp_path) -> None:
    model = instantiate(build_vgg(20, n_classes=3, width_multiplier=1 / 32), seed=0, dtype='float64')
    restored = load_checkpoint(save_checkpoint(tmp_path / "vgg.rfcnn", model))
    assert restored.dtype == np.float32


def corrupt_checkpoints_test(tmp_path, trained_model) -> None:
    model, _ = trained_model
    raw = checkpoint_bytes(model)
    assert raw.startswith(CHECKPOINT_MAGIC)

    cases = {
        "magic": b"XXCNN1" + raw[6:],
        "version": raw[:6] + b"\x09\x00" + raw[8:],
        "truncated": raw[:-20],
        "trailing": raw + b"\x00",
    }
    for name, payload in cases.items():
        path = tmp_path / f"{name}.rfcnn"
        path.write_bytes(payload)
        with pytest.raises(ContainerFormatError):
            load_checkpoint(path)


def mismatched_architecture_test(tmp_path, trained_model) -> None:
    model, _ = trained_model
    raw = checkpoint_bytes(model)
    text = model.arch_spec.to_text().encode('utf-8')
    other = build_ss_resnet(3, n_classes=2, width_multiplier=1 / 32).to_text().encode('utf-8')
    assert len(other) == len(text)

    path = tmp_path / "swapped.rfcnn"
    path.write_bytes(raw.replace(text, other))
    with pytest.raises(ContainerFormatError):
        load_checkpoint(path)


if __name__ == '__main__':
    from pathlib import Path
    from tempfile import mkdtemp

    untrained_model_round_trip_test(Path(mkdtemp()))

import librosa
import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import chisquare
from sklearn.metrics import average_precision_score

from rfshake.data import (
    DatasetConfig, SampleRecord, SpectrogramConfig, SyntheticConfig, TaggingDataset, TaggingSplit,
    apply_normalization, compute_mel_spectrogram, compute_normalization_stats, generate_synthetic,
    load_dataset, load_synthetic, matched_filter_scores, normalize, random_crop, read_container,
    read_manifest, stack_records, write_container, write_manifest,
)
from rfshake.errors import ArgumentError, ContainerFormatError, DimensionError

SMALL_FRONT_END = SpectrogramConfig(n_mels=32, window_size=256, overlap=0.5, sample_rate=8000)


def frame_count_test() -> None:
    cfg = SpectrogramConfig()
    assert cfg.hop_length == 512
    assert cfg.n_frames(10 * 22050) == 427
    spec = compute_mel_spectrogram(np.zeros(10 * 22050), cfg)
    assert spec.shape == (256, 427) and spec.dtype == np.float32

    long_clips = SpectrogramConfig(overlap=0.25)
    assert long_clips.hop_length == 1536


def sine_peaks_in_its_mel_band_test() -> None:
    cfg = SpectrogramConfig()
    band = 180
    # filter k peaks at the (k + 1)-th of n_mels + 2 mel-spaced frequencies
    freq = librosa.mel_frequencies(n_mels=cfg.n_mels + 2, fmin=0.0, fmax=cfg.sample_rate / 2)[band + 1]
    t = np.arange(cfg.sample_rate) / cfg.sample_rate
    spec = compute_mel_spectrogram(np.sin(2 * np.pi * freq * t), cfg)
    assert np.all(np.argmax(spec, axis=0) == band)


def silence_is_flat_test() -> None:
    spec = compute_mel_spectrogram(np.zeros(4096), SpectrogramConfig())
    np.testing.assert_allclose(spec, -200.0)

    linear = compute_mel_spectrogram(np.zeros(4096), SpectrogramConfig(log_compress=False))
    assert np.all(linear == 0.0)


def spectrogram_errors_test() -> None:
    with pytest.raises(ArgumentError):
        compute_mel_spectrogram(np.zeros(1000), SpectrogramConfig())
    with pytest.raises(DimensionError):
        compute_mel_spectrogram(np.zeros((2, 4096)), SpectrogramConfig())
    with pytest.raises(ValidationError):
        SpectrogramConfig(window_size=2048, overlap=0.3)
    with pytest.raises(ValidationError):
        SpectrogramConfig(overlap=1.0)


def normalization_test() -> None:
    rng = np.random.default_rng(0)
    specs = rng.normal(3.0, 2.0, size=(20, 8, 50))
    specs[:, 5] = 7.0
    stats = compute_normalization_stats(specs)
    out = normalize(specs, stats)
    np.testing.assert_allclose(out.mean(axis=(0, 2)), 0.0, atol=1e-9)
    np.testing.assert_allclose(np.delete(out.std(axis=(0, 2)), 5), 1.0, atol=1e-9)
    assert np.all(np.isfinite(out)) and np.all(out[:, 5] == 0.0)

    with pytest.raises(DimensionError):
        normalize(np.zeros((4, 10)), stats)


def normalization_uses_train_statistics_only_test() -> None:
    rng = np.random.default_rng(1)
    y = np.zeros((30, 2), dtype=np.float32)
    train = TaggingSplit(x=rng.normal(size=(30, 6, 40)).astype(np.float32), y=y, known=y == 0)
    test = TaggingSplit(x=rng.normal(5.0, 1.0, size=(30, 6, 40)).astype(np.float32), y=y, known=y == 0)
    stats = apply_normalization(TaggingDataset(train=train, test=test))

    assert np.all(np.abs(stats.mean) < 0.2)
    assert np.all(test.x.mean(axis=(0, 2)) > 4.0)
    assert train.x.dtype == test.x.dtype == np.float32


def crop_is_uniform_test() -> None:
    spec = np.tile(np.arange(10.0), (3, 1))
    rng = np.random.default_rng(0)
    starts = [int(random_crop(spec, 4, rng)[0, 0]) for _ in range(7000)]
    counts = np.bincount(starts, minlength=7)
    assert len(counts) == 7
    assert chisquare(counts).pvalue > 1e-3


def crop_errors_test() -> None:
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(random_crop(np.ones((2, 5)), 5, rng), np.ones((2, 5)))
    with pytest.raises(ArgumentError):
        random_crop(np.ones((2, 5)), 6, rng)
    with pytest.raises(ArgumentError):
        random_crop(np.ones((2, 5)), 0, rng)


def synthetic_is_deterministic_test() -> None:
    cfg = SyntheticConfig(n_train=20, n_test=10)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    np.testing.assert_array_equal(a.train.x, b.train.x)
    np.testing.assert_array_equal(a.test.y, b.test.y)
    np.testing.assert_array_equal(a.templates, b.templates)

    other = generate_synthetic(cfg.model_copy(update={'seed': 1}))
    assert not np.array_equal(a.train.x, other.train.x)
    assert a.train.x.shape == (20, 64, 128) and a.test.ids[0] == "test-00000"


def synthetic_label_prior_test() -> None:
    cfg = SyntheticConfig()
    dataset = generate_synthetic(cfg)
    labels = np.concatenate([dataset.train.y, dataset.test.y])
    sigma = np.sqrt(cfg.density * (1 - cfg.density) / labels.size)
    assert abs(labels.mean() - cfg.density) < 4 * sigma
    assert set(np.unique(labels)) <= {0.0, 1.0}
    assert dataset.train.known.all()


def synthetic_templates_test() -> None:
    dataset = generate_synthetic(SyntheticConfig(n_train=2, n_test=2))
    assert dataset.templates.shape == (4, 5, 5)
    np.testing.assert_allclose(dataset.templates.sum(axis=(1, 2)), 0.0, atol=1e-12)
    assert dataset.rows.tolist() == [0, 20, 39, 59]


def synthetic_local_evidence_is_sufficient_test() -> None:
    dataset = generate_synthetic(SyntheticConfig())
    scores = matched_filter_scores(dataset.test, dataset.templates, dataset.rows)
    assert np.all((scores >= 0) & (scores <= 1))
    aps = [average_precision_score(dataset.test.y[:, c], scores[:, c]) for c in range(dataset.n_classes)]
    assert np.mean(aps) > 0.9


def synthetic_config_validation_test() -> None:
    with pytest.raises(ValidationError):
        SyntheticConfig(pattern_size=9, n_bins=8)
    with pytest.raises(ValidationError):
        SyntheticConfig(density=1.0)
    empty = generate_synthetic(SyntheticConfig(n_train=3, n_test=0))
    assert len(empty.test) == 0 and empty.test.x.shape == (0, 64, 128)


def records(rng: np.random.Generator, n: int, rank: int = 2):
    out = []
    for i in range(n):
        payload = rng.normal(size=(4, 7)) if rank == 2 else 0.1 * rng.normal(size=2048)
        known = np.array([True, i % 2 == 0, True])
        out.append(SampleRecord(
            id=f"clip-{i}", labels=rng.random(3).astype(np.float32), known=known,
            payload=payload.astype(np.float32),
        ))
    return out


def container_round_trip_test(tmp_path) -> None:
    rng = np.random.default_rng(0)
    written = records(rng, 3) + records(rng, 1, rank=1)
    written[-1].id = "wave-0"
    path = write_container(tmp_path / "data.rfd", written)

    loaded = read_container(path)
    assert [r.id for r in loaded] == [r.id for r in written]
    for a, b in zip(written, loaded):
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.known, b.known)
        np.testing.assert_array_equal(a.payload, b.payload)

    split = stack_records(loaded[:3])
    assert split.x.shape == (3, 4, 7) and split.ids == ["clip-0", "clip-1", "clip-2"]
    with pytest.raises(DimensionError):
        stack_records(loaded)


def corrupt_container_test(tmp_path) -> None:
    raw = write_container(tmp_path / "data.rfd", records(np.random.default_rng(0), 2)).read_bytes()
    for name, payload in {
        "magic": b"NOTDATA" + raw[7:],
        "truncated": raw[:-8],
        "trailing": raw + b"\x01",
        "version": raw[:7] + b"\x02\x00" + raw[9:],
    }.items():
        path = tmp_path / f"{name}.rfd"
        path.write_bytes(payload)
        with pytest.raises(ContainerFormatError):
            read_container(path)


def manifest_test(tmp_path) -> None:
    path = write_manifest(tmp_path / "manifest.csv", {"a": "train", "b": "test", "007": "train"})
    assert read_manifest(path) == {"a": "train", "b": "test", "007": "train"}

    with pytest.raises(ArgumentError):
        write_manifest(tmp_path / "bad.csv", {"a": "validation"})
    (tmp_path / "bad.csv").write_text("id,split\na,dev\n")
    with pytest.raises(ContainerFormatError):
        read_manifest(tmp_path / "bad.csv")


def load_container_dataset_test(tmp_path) -> None:
    rng = np.random.default_rng(2)
    written = records(rng, 7, rank=1)
    container = write_container(tmp_path / "waves.rfd", written)
    splits = {f"clip-{i}": "train" for i in range(4)}
    splits.update({"clip-4": "test", "clip-5": "test"})
    manifest = write_manifest(tmp_path / "manifest.csv", splits)

    cfg = DatasetConfig(kind='container', container_path=container, manifest_path=manifest, spectrogram=SMALL_FRONT_END)
    dataset = load_dataset(cfg)
    assert dataset.train.x.shape == (4, 32, 15)
    assert dataset.test.ids == ["clip-4", "clip-5"]
    np.testing.assert_array_equal(dataset.train.known[:, 1], [True, False, True, False])
    np.testing.assert_allclose(dataset.train.x.mean(axis=(0, 2)), 0.0, atol=1e-4)

    with pytest.raises(FileNotFoundError):
        load_dataset(cfg.model_copy(update={'container_path': tmp_path / "missing.rfd"}))
    with pytest.raises(ValidationError):
        DatasetConfig(kind='container', container_path=container)


def synthetic_cache_test(tmp_path) -> None:
    cfg = SyntheticConfig(n_train=6, n_test=4)
    first = load_synthetic(cfg, use_cache=True, cache_dir=tmp_path)
    assert len(list(tmp_path.glob("synthetic_*.npz"))) == 1
    second = load_synthetic(cfg, use_cache=True, cache_dir=tmp_path)
    np.testing.assert_array_equal(first.train.x, second.train.x)
    np.testing.assert_array_equal(first.test.known, second.test.known)
    np.testing.assert_array_equal(first.rows, second.rows)
    assert second.train.ids == first.train.ids


if __name__ == '__main__':
    run_test = lambda test_no: [
        frame_count_test,
        sine_peaks_in_its_mel_band_test,
        synthetic_local_evidence_is_sufficient_test,
    ][test_no - 1].__call__()

    run_test(test_no=3)

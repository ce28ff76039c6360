from pathlib import Path
from typing import Literal, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, model_validator

from rfshake.errors import ContainerFormatError
from rfshake.utils.cacher import Cacher, generate_key
from .dataset import SampleRecord, TaggingDataset, TaggingSplit, read_container, read_manifest, stack_records
from .spectrogram import (
    NormalizationStats, SpectrogramConfig, compute_mel_spectrogram, compute_normalization_stats, normalize,
)
from .synthetic import SyntheticConfig, SyntheticTaggingDataset, generate_synthetic


class DatasetConfig(BaseModel):
    kind: Literal['synthetic', 'container'] = 'synthetic'
    synthetic: SyntheticConfig = SyntheticConfig()
    container_path: Optional[Path] = None
    manifest_path: Optional[Path] = None
    spectrogram: SpectrogramConfig = SpectrogramConfig()
    normalize: bool = True
    use_cache: bool = True
    cache_dir: Optional[Path] = None

    @model_validator(mode='after')
    def _check_paths(self) -> 'DatasetConfig':
        if self.kind == 'container' and (self.container_path is None or self.manifest_path is None):
            raise ValueError("a container dataset needs both container_path and manifest_path")
        return self


def _as_spectrogram(record: SampleRecord, cfg: SpectrogramConfig) -> SampleRecord:
    if record.payload.ndim == 1:
        record = SampleRecord(
            id=record.id, labels=record.labels, known=record.known,
            payload=compute_mel_spectrogram(record.payload, cfg),
        )
    return record


def load_synthetic(cfg: SyntheticConfig, use_cache: bool = True, cache_dir: Optional[Path] = None) -> SyntheticTaggingDataset:
    """Generate (or reload) a synthetic dataset; the cache key is the config hash."""
    cacher = Cacher(f"synthetic-{generate_key(cfg.model_dump())}", data_format='npz', cache_dir=cache_dir) if use_cache else None
    if cacher is not None and cacher.cache_file_exists():
        logger.info(f"Loading cached synthetic dataset {cacher.cache_file}")
        arrays = cacher.load_cache()
        return SyntheticTaggingDataset(
            train=TaggingSplit(x=arrays['train_x'], y=arrays['train_y'], known=arrays['train_known'],
                               ids=[f"train-{i:05d}" for i in range(cfg.n_train)]),
            test=TaggingSplit(x=arrays['test_x'], y=arrays['test_y'], known=arrays['test_known'],
                              ids=[f"test-{i:05d}" for i in range(cfg.n_test)]),
            metadata={'source': 'synthetic', 'seed': cfg.seed},
            templates=arrays['templates'], rows=arrays['rows'],
        )

    dataset = generate_synthetic(cfg)
    if cacher is not None:
        cacher.save_cache({
            'train_x': dataset.train.x, 'train_y': dataset.train.y, 'train_known': dataset.train.known,
            'test_x': dataset.test.x, 'test_y': dataset.test.y, 'test_known': dataset.test.known,
            'templates': dataset.templates, 'rows': dataset.rows,
        })
    return dataset


def load_container_dataset(container_path: Path, manifest_path: Path, cfg: SpectrogramConfig) -> TaggingDataset:
    for path in (container_path, manifest_path):
        if not Path(path).exists():
            raise FileNotFoundError(f"dataset file not found: {path}")

    splits = read_manifest(manifest_path)
    by_split = {'train': [], 'test': []}
    for record in read_container(container_path):
        if record.id not in splits:
            logger.warning(f"Record {record.id} is not in the manifest; skipped")
            continue
        by_split[splits[record.id]].append(_as_spectrogram(record, cfg))

    if not by_split['train']:
        raise ContainerFormatError(f"{manifest_path} assigns no records to the train split")
    train = stack_records(by_split['train'])
    test = (
        stack_records(by_split['test']) if by_split['test']
        else TaggingSplit.empty(train.x.shape[1], train.x.shape[2], train.n_classes)
    )
    return TaggingDataset(
        train=train, test=test,
        metadata={'source': str(container_path), 'sample_rate': cfg.sample_rate},
    )


def apply_normalization(dataset: TaggingDataset) -> NormalizationStats:
    """Normalize both splits in place with statistics of the train split."""
    stats = compute_normalization_stats(dataset.train.x)
    dataset.train.x = normalize(dataset.train.x, stats).astype(np.float32)
    if len(dataset.test):
        dataset.test.x = normalize(dataset.test.x, stats).astype(np.float32)
    return stats


def load_dataset(cfg: DatasetConfig) -> TaggingDataset:
    if cfg.kind == 'synthetic':
        dataset = load_synthetic(cfg.synthetic, cfg.use_cache, cfg.cache_dir)
    else:
        dataset = load_container_dataset(cfg.container_path, cfg.manifest_path, cfg.spectrogram)

    if cfg.normalize:
        apply_normalization(dataset)
    return dataset

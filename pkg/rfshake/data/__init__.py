from .spectrogram import (
    NormalizationStats,
    SpectrogramConfig,
    compute_mel_spectrogram,
    compute_normalization_stats,
    normalize,
    random_crop,
)
from .dataset import (
    SampleRecord,
    TaggingDataset,
    TaggingSplit,
    read_container,
    read_manifest,
    stack_records,
    write_container,
    write_manifest,
)
from .synthetic import (
    SyntheticConfig,
    SyntheticTaggingDataset,
    generate_synthetic,
    matched_filter_scores,
)
from .loader import DatasetConfig, apply_normalization, load_dataset, load_synthetic

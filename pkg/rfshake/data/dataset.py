"""Tagging splits and the `RFDATA1` binary dataset container.

Container layout (little-endian):

    b"RFDATA1"  u16 version  u32 n_records
    per record:
        u16 id length, id bytes (utf-8)
        u32 n_classes, float32 labels[n_classes], u8 known[n_classes]
        u8 rank, u32 extents[rank], float32 payload

A rank-1 payload is a raw waveform, rank 2 a spectrogram [bins, frames].
The CSV manifest has columns `id,split` with split in {train, test}.
"""
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, List, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from rfshake.errors import ArgumentError, ContainerFormatError, DimensionError

CONTAINER_MAGIC = b"RFDATA1"
CONTAINER_VERSION = 1
SPLITS = ('train', 'test')
MANIFEST_COLUMNS = ['id', 'split']


@dataclass
class TaggingSplit:
    x: np.ndarray
    """[N, n_bins, n_frames] float32"""
    y: np.ndarray
    """[N, n_classes] soft labels in [0, 1]"""
    known: np.ndarray
    """[N, n_classes] bool, False marks an unknown label"""
    ids: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.y.shape != self.known.shape:
            raise DimensionError(f"labels {self.y.shape} and mask {self.known.shape} differ")
        if self.x.shape[0] != self.y.shape[0]:
            raise DimensionError(f"{self.x.shape[0]} spectrograms but {self.y.shape[0]} label rows")
        if not self.ids:
            self.ids = [f"{i:05d}" for i in range(self.x.shape[0])]

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def n_classes(self) -> int:
        return self.y.shape[1]

    @classmethod
    def empty(cls, n_bins: int, n_frames: int, n_classes: int) -> 'TaggingSplit':
        return cls(
            x=np.zeros((0, n_bins, n_frames), dtype=np.float32),
            y=np.zeros((0, n_classes), dtype=np.float32),
            known=np.zeros((0, n_classes), dtype=bool),
            ids=[],
        )


@dataclass
class TaggingDataset:
    train: TaggingSplit
    test: TaggingSplit
    metadata: Dict[str, Union[str, int, float]] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.train.n_classes


@dataclass
class SampleRecord:
    id: str
    labels: np.ndarray
    known: np.ndarray
    payload: np.ndarray


def _write_u(handle: BinaryIO, fmt: str, value: int) -> None:
    handle.write(struct.pack('<' + fmt, value))


def _read(handle: BinaryIO, fmt: str):
    size = struct.calcsize('<' + fmt)
    raw = handle.read(size)
    if len(raw) != size:
        raise ContainerFormatError("unexpected end of container")
    return struct.unpack('<' + fmt, raw)


def write_container(path: Union[str, Path], records: Sequence[SampleRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as handle:
        handle.write(CONTAINER_MAGIC)
        _write_u(handle, 'H', CONTAINER_VERSION)
        _write_u(handle, 'I', len(records))
        for record in records:
            name = record.id.encode('utf-8')
            labels = np.asarray(record.labels, dtype='<f4').reshape(-1)
            known = np.asarray(record.known, dtype=bool).reshape(-1)
            if labels.shape != known.shape:
                raise DimensionError(f"record {record.id}: labels and mask differ in length")
            payload = np.asarray(record.payload, dtype='<f4')
            if payload.ndim not in (1, 2):
                raise DimensionError(f"record {record.id}: payload must be rank 1 or 2, got {payload.ndim}")

            _write_u(handle, 'H', len(name))
            handle.write(name)
            _write_u(handle, 'I', labels.shape[0])
            handle.write(labels.tobytes())
            handle.write(known.astype(np.uint8).tobytes())
            _write_u(handle, 'B', payload.ndim)
            for extent in payload.shape:
                _write_u(handle, 'I', extent)
            handle.write(payload.tobytes())

    logger.info(f"Wrote {len(records)} records to {path}")
    return path


def read_container(path: Union[str, Path]) -> List[SampleRecord]:
    path = Path(path)
    records: List[SampleRecord] = []
    with open(path, 'rb') as handle:
        if handle.read(len(CONTAINER_MAGIC)) != CONTAINER_MAGIC:
            raise ContainerFormatError(f"{path} is not an RFDATA1 container")
        (version,) = _read(handle, 'H')
        if version != CONTAINER_VERSION:
            raise ContainerFormatError(f"unsupported container version {version}")
        (n_records,) = _read(handle, 'I')

        for _ in range(n_records):
            (name_len,) = _read(handle, 'H')
            name = handle.read(name_len).decode('utf-8')
            (n_classes,) = _read(handle, 'I')
            labels = np.frombuffer(handle.read(4 * n_classes), dtype='<f4').astype(np.float32)
            known = np.frombuffer(handle.read(n_classes), dtype=np.uint8).astype(bool)
            (rank,) = _read(handle, 'B')
            extents = _read(handle, 'I' * rank)
            count = int(np.prod(extents))
            raw = handle.read(4 * count)
            if len(raw) != 4 * count or labels.shape[0] != n_classes or known.shape[0] != n_classes:
                raise ContainerFormatError(f"record {name!r} is truncated")
            payload = np.frombuffer(raw, dtype='<f4').reshape(extents).astype(np.float32)
            records.append(SampleRecord(id=name, labels=labels, known=known, payload=payload))

        if handle.read(1):
            raise ContainerFormatError(f"{path} has trailing bytes after {n_records} records")
    return records


def write_manifest(path: Union[str, Path], splits: Dict[str, str]) -> Path:
    """`splits` maps sample id to 'train' or 'test'."""
    bad = {s for s in splits.values() if s not in SPLITS}
    if bad:
        raise ArgumentError(f"unknown split names {sorted(bad)}")
    path = Path(path)
    frame = pd.DataFrame({'id': list(splits.keys()), 'split': list(splits.values())}, columns=MANIFEST_COLUMNS)
    frame.to_csv(path, index=False)
    return path


def read_manifest(path: Union[str, Path]) -> Dict[str, str]:
    frame = pd.read_csv(path, dtype=str)
    if list(frame.columns) != MANIFEST_COLUMNS:
        raise ContainerFormatError(f"manifest {path} must have columns {MANIFEST_COLUMNS}")
    bad = set(frame['split']) - set(SPLITS)
    if bad:
        raise ContainerFormatError(f"manifest {path} has unknown splits {sorted(bad)}")
    return dict(zip(frame['id'], frame['split']))


def stack_records(records: Sequence[SampleRecord]) -> TaggingSplit:
    """Stack rank-2 records into one split; every spectrogram must share its shape."""
    if not records:
        raise ArgumentError("cannot stack an empty record list")
    shapes = {r.payload.shape for r in records}
    if len(shapes) != 1:
        raise DimensionError(f"spectrograms differ in shape: {sorted(shapes)}")
    return TaggingSplit(
        x=np.stack([r.payload for r in records]).astype(np.float32),
        y=np.stack([r.labels for r in records]).astype(np.float32),
        known=np.stack([r.known for r in records]),
        ids=[r.id for r in records],
    )

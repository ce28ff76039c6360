"""`RFCNN1` checkpoint files.

Layout (little-endian):

    b"RFCNN1"  u16 version
    u32 text length, architecture JSON (utf-8)
    u32 count, records: parameters then batchnorm running statistics
    u32 count, records: Adam first moments
    u32 count, records: Adam second moments
    u64 step_count

A record is u16 name length, name bytes, u8 rank, u32 extents[rank] and a
float32 payload. Loading always yields a float32 model.
"""
import struct
from io import BytesIO
from pathlib import Path
from typing import BinaryIO, Dict, List, Tuple, Union

import numpy as np
from loguru import logger

from rfshake.architectures import ArchSpec, ModelState, instantiate
from rfshake.errors import ContainerFormatError

CHECKPOINT_MAGIC = b"RFCNN1"
CHECKPOINT_VERSION = 1

Records = List[Tuple[str, np.ndarray]]


def _pack(fmt: str, *values) -> bytes:
    return struct.pack('<' + fmt, *values)


def _write_records(handle: BinaryIO, records: Records) -> None:
    handle.write(_pack('I', len(records)))
    for name, array in records:
        encoded = name.encode('utf-8')
        array = np.asarray(array, dtype='<f4')
        handle.write(_pack('H', len(encoded)))
        handle.write(encoded)
        handle.write(_pack('B', array.ndim))
        for extent in array.shape:
            handle.write(_pack('I', extent))
        handle.write(array.tobytes())


class _Reader:
    def __init__(self, raw: bytes) -> None:
        self.raw = raw
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.raw):
            raise ContainerFormatError("checkpoint is truncated")
        chunk = self.raw[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack('<' + fmt, self.take(struct.calcsize('<' + fmt)))

    def records(self) -> Dict[str, np.ndarray]:
        (count,) = self.unpack('I')
        out: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = self.unpack('H')
            name = self.take(name_len).decode('utf-8')
            (rank,) = self.unpack('B')
            extents = self.unpack('I' * rank)
            size = int(np.prod(extents)) if rank else 1
            out[name] = np.frombuffer(self.take(4 * size), dtype='<f4').reshape(extents).astype(np.float32)
        return out


def checkpoint_bytes(state: ModelState) -> bytes:
    text = state.arch_spec.to_text().encode('utf-8')
    params = [(name, t.data) for name, t in state.parameters.items()]
    buffers = list(state.buffers.items())

    handle = BytesIO()
    handle.write(CHECKPOINT_MAGIC)
    handle.write(_pack('H', CHECKPOINT_VERSION))
    handle.write(_pack('I', len(text)))
    handle.write(text)
    _write_records(handle, params + buffers)
    _write_records(handle, list(state.adam_m.items()))
    _write_records(handle, list(state.adam_v.items()))
    handle.write(_pack('Q', state.step_count))
    return handle.getvalue()


def save_checkpoint(path: Union[str, Path], state: ModelState) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(state))
    logger.debug(f"Saved checkpoint {path} (step {state.step_count})")
    return path


def _assign(target: Dict[str, np.ndarray], source: Dict[str, np.ndarray], what: str) -> None:
    if set(target) != set(source):
        missing = sorted(set(target) - set(source))
        extra = sorted(set(source) - set(target))
        raise ContainerFormatError(f"{what} names do not match the architecture (missing {missing[:3]}, extra {extra[:3]})")
    for name in target:
        if target[name].shape != source[name].shape:
            raise ContainerFormatError(f"{what} {name}: shape {source[name].shape}, expected {target[name].shape}")
        target[name] = source[name]


def load_checkpoint(path: Union[str, Path]) -> ModelState:
    """Rebuild a float32 model from the embedded architecture and restore all state."""
    reader = _Reader(Path(path).read_bytes())
    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise ContainerFormatError(f"{path} is not an RFCNN1 checkpoint")
    (version,) = reader.unpack('H')
    if version != CHECKPOINT_VERSION:
        raise ContainerFormatError(f"unsupported checkpoint version {version}")
    (text_len,) = reader.unpack('I')
    spec = ArchSpec.from_text(reader.take(text_len).decode('utf-8'))

    state = instantiate(spec, seed=0, dtype=np.float32)
    params_and_buffers = reader.records()
    adam_m = reader.records()
    adam_v = reader.records()
    (step_count,) = reader.unpack('Q')
    if reader.offset != len(reader.raw):
        raise ContainerFormatError(f"{path} has trailing bytes")

    params = {name: t.data for name, t in state.parameters.items()}
    buffers = state.buffers
    buffer_names = set(buffers)
    _assign(params, {k: v for k, v in params_and_buffers.items() if k not in buffer_names}, "parameter")
    _assign(buffers, {k: v for k, v in params_and_buffers.items() if k in buffer_names}, "buffer")
    for name, tensor in state.parameters.items():
        tensor.data = params[name]
    state.network.load_running_buffers(buffers)
    _assign(state.adam_m, adam_m, "first moment")
    _assign(state.adam_v, adam_v, "second moment")
    state.step_count = int(step_count)

    logger.info(f"Loaded checkpoint {path}: {spec.name}, step {step_count}")
    return state

"""Background batch assembly: shuffling, time crops and mixup run ahead of the
training loop in one producer thread feeding a bounded queue."""
import threading
from queue import Queue
from typing import Iterator, List, NamedTuple, Optional

import numpy as np
from loguru import logger

from rfshake.data import TaggingSplit, random_crop
from .config import TrainConfig
from .mixup import mixup_batch

AUGMENT_STREAM = 2
"""SeedSequence child index of the augmentation stream; 0 and 1 seed the model."""

_DONE = object()


class Batch(NamedTuple):
    x: np.ndarray
    """[B, 1, n_bins, n_frames]"""
    y: np.ndarray
    known: np.ndarray


def augment_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(AUGMENT_STREAM + 1)[AUGMENT_STREAM])


def make_batches(split: TaggingSplit, cfg: TrainConfig, rng: np.random.Generator) -> Iterator[Batch]:
    """One shuffled epoch of training batches, all randomness drawn from `rng`."""
    order = rng.permutation(len(split))
    for start in range(0, len(order), cfg.batch_size):
        index = order[start:start + cfg.batch_size]
        x = split.x[index]
        if cfg.crop_frames is not None:
            x = np.stack([random_crop(sample, cfg.crop_frames, rng) for sample in x])
        y = split.y[index].astype(np.float32)
        known = split.known[index]

        if cfg.mixup_enabled and len(index) > 1:
            partner = rng.permutation(len(index))
            mixed = mixup_batch(
                x, y, x[partner], y[partner], known1=known, known2=known[partner],
                rng=rng, concentration=cfg.mixup_concentration,
            )
            x, y, known = mixed.x, mixed.y, mixed.known
        yield Batch(x=x[:, None].astype(np.float32), y=y, known=known)


class BatchPipeline:
    """Iterate one epoch of batches produced by a daemon thread.

    At most `capacity` finished batches wait in the queue. Batch content
    depends only on `rng`, never on thread timing.
    """

    def __init__(self, split: TaggingSplit, cfg: TrainConfig, rng: np.random.Generator, capacity: Optional[int] = None) -> None:
        self.split = split
        self.cfg = cfg
        self.rng = rng
        self.capacity = capacity or cfg.prefetch
        self._queue: Queue = Queue(maxsize=self.capacity)
        self._error: Optional[BaseException] = None
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def _produce(self) -> None:
        try:
            for batch in make_batches(self.split, self.cfg, self.rng):
                if self._stop.is_set():
                    return
                self._queue.put(batch)
        except BaseException as e:  # re-raised on the consumer side
            self._error = e
        finally:
            self._queue.put(_DONE)

    def __iter__(self) -> Iterator[Batch]:
        self._thread = threading.Thread(target=self._produce, name="batch-pipeline", daemon=True)
        self._thread.start()
        try:
            while True:
                item = self._queue.get()
                if item is _DONE:
                    break
                yield item
        finally:
            self.close()
        if self._error is not None:
            raise self._error

    def close(self) -> None:
        self._stop.set()
        # drain so a blocked producer can finish
        while self._thread is not None and self._thread.is_alive():
            while not self._queue.empty():
                self._queue.get_nowait()
            self._thread.join(timeout=0.05)
        logger.trace("Batch pipeline closed")

    def collect(self) -> List[Batch]:
        return list(self)

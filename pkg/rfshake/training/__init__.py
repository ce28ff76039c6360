from rfshake.architectures import ModelState, instantiate

from .config import TrainConfig
from .optimizer import adam_step
from .mixup import MixedBatch, mixup_batch, sample_lambda
from .pipeline import Batch, BatchPipeline, augment_rng, make_batches
from .checkpoint import CHECKPOINT_MAGIC, checkpoint_bytes, load_checkpoint, save_checkpoint
from .trainer import EpochRecord, TrainReport, evaluate, train, window_summary

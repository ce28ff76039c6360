"""Experiment configuration, single runs and receptive-field sweeps.

A run trains one network on one dataset and leaves a run directory with the
config snapshot, per-epoch CSVs, a window report and checkpoints. A sweep
trains one network per ρ (or VGG removal count) on the same seeded dataset
and collects final-epoch numbers into `sweep.csv`.
"""
import json
import hashlib
from concurrent.futures import ProcessPoolExecutor, as_completed
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from loguru import logger
from pydantic import BaseModel, Field, ValidationError, model_validator
from scipy.stats import kendalltau
from typing_extensions import TypedDict

from rfshake.architectures import ArchName, ArchSpec, DEFAULT_CHANNELS, build_spec, instantiate
from rfshake.data import DatasetConfig, TaggingDataset, load_dataset
from rfshake.errors import ConfigError
from rfshake.metrics import MetricsReport, metrics_rows
from rfshake.rf_analysis import compute_rf
from rfshake.settings import default_output_dir
from rfshake.training import EpochRecord, TrainConfig, TrainReport, train
from rfshake.utils import RunInfo, RunManager

EPOCH_COLUMNS = ["epoch", "train_loss", "test_loss", "macro_pr_auc", "f1_classical", "f1_posneg"]
METRIC_COLUMNS = ["run_id", "epoch", "rf", "arch", "metric_name", "value"]
SWEEP_COLUMNS = ["rf", "arch", "train_loss", "test_loss", "macro_pr_auc", "f1_classical", "f1_posneg", "epoch"]


class SweepConfig(BaseModel):
    values: List[int] = [0, 3, 7, 12, 21]
    """ρ values, or removal counts when arch is vgg"""
    parallel: int = Field(default=1, ge=1)


class ExperimentConfig(BaseModel):
    arch: ArchName = 'cp_resnet'
    rho: Optional[int] = None
    n_removed: Optional[int] = None
    channels: List[int] = list(DEFAULT_CHANNELS)
    width_multiplier: float = Field(default=1.0, gt=0.0)
    dataset: DatasetConfig = DatasetConfig()
    train: TrainConfig = TrainConfig()
    sweep: SweepConfig = SweepConfig()
    output_dir: Optional[Path] = None

    @model_validator(mode='after')
    def _check_depth(self) -> 'ExperimentConfig':
        if self.arch == 'vgg':
            if self.rho is not None:
                raise ValueError("vgg is configured with n_removed, not rho")
            if self.n_removed is None:
                self.n_removed = 0
        else:
            if self.n_removed is not None:
                raise ValueError(f"{self.arch} is configured with rho, not n_removed")
            if self.rho is None:
                raise ValueError(f"{self.arch} needs rho")
        return self

    @property
    def value(self) -> int:
        return self.n_removed if self.arch == 'vgg' else self.rho

    @property
    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir) if self.output_dir is not None else default_output_dir()

    def with_value(self, value: int) -> 'ExperimentConfig':
        key = 'n_removed' if self.arch == 'vgg' else 'rho'
        return self.model_copy(update={key: value})

    def with_seed(self, seed: int) -> 'ExperimentConfig':
        return self.model_copy(update={'train': self.train.model_copy(update={'seed': seed})})

    def build_arch(self, n_classes: int) -> ArchSpec:
        return build_spec(self.arch, self.value, n_classes, self.channels, self.width_multiplier)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode='json'), sort_keys=False)

    @classmethod
    def from_mapping(cls, data: Dict) -> 'ExperimentConfig':
        try:
            return cls.model_validate(data or {})
        except ValidationError as e:
            raise ConfigError(f"invalid experiment config: {e}") from e

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> 'ExperimentConfig':
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as e:
            raise ConfigError(f"{path} is not valid YAML: {e}") from e
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a mapping at the top level")
        return cls.from_mapping(data)


class RunOutcome(BaseModel):
    info: RunInfo
    run_dir: str
    report: TrainReport


class SweepRow(TypedDict):
    rf: int
    arch: str
    train_loss: float
    test_loss: float
    macro_pr_auc: float
    f1_classical: float
    f1_posneg: float
    epoch: int


class SweepSummary(BaseModel):
    sweep_dir: str
    rfs: List[int]
    final_train_loss: List[float]
    final_test_loss: List[float]
    kendall_tau_train_loss: Optional[float]
    min_test_loss_rf: int
    largest_rf_above_min: bool
    failed: List[int] = []


def run_experiment(
    cfg: ExperimentConfig,
    dataset: Optional[TaggingDataset] = None,
    register: bool = True,
    run_id: Optional[str] = None,
) -> RunOutcome:
    """Train and evaluate one configuration inside a fresh run directory."""
    dataset = dataset if dataset is not None else load_dataset(cfg.dataset)
    spec = cfg.build_arch(dataset.n_classes)
    rf = compute_rf(spec).max_rf

    manager = RunManager.new_run(
        cfg.to_yaml(), cfg.arch, rf, root_dir=cfg.resolved_output_dir, run_id=run_id, register=register,
    )
    model = instantiate(spec, seed=cfg.train.seed, dtype=cfg.train.dtype)
    logger.info(f"Run {manager.run_id}: {spec.name}, RF {rf}x{rf}, {model.parameter_count()} parameters")

    epochs: List[EpochRecord] = []
    rows: List[Dict] = []

    def on_epoch(record: EpochRecord, report: MetricsReport) -> None:
        epochs.append(record)
        rows.extend(metrics_rows(report, manager.run_id, record['epoch'], rf, cfg.arch))
        for name in ("train_loss", "test_loss"):
            rows.append(dict(run_id=manager.run_id, epoch=record['epoch'], rf=rf, arch=cfg.arch,
                             metric_name=name, value=record[name]))
        manager.write_table(manager.epochs_filepath, epochs, EPOCH_COLUMNS)
        manager.write_table(manager.metrics_filepath, rows, METRIC_COLUMNS)

    try:
        report = train(model, dataset, cfg.train, checkpoint_dir=manager.checkpoints_dirpath, on_epoch=on_epoch)
    except Exception:
        manager.set_status('failed')
        logger.error(f"Run {manager.run_id} failed after {len(epochs)} epochs; partial results in {manager.run_dirpath}")
        raise

    manager.write_report({
        'run_id': manager.run_id,
        'arch': cfg.arch,
        'network': spec.name,
        'rf': rf,
        'parameter_count': model.parameter_count(),
        'eval_window': report.eval_window,
        'window_mean': report.window_mean,
        'window_std': report.window_std,
        'final_metrics': report.final_metrics.model_dump(),
        'sample_rate': cfg.dataset.spectrogram.sample_rate,
        'checkpoints': report.checkpoints,
    })
    info = manager.set_status('finished')
    return RunOutcome(info=info, run_dir=str(manager.run_dirpath), report=report)


def sweep_rows(outcome: RunOutcome) -> List[SweepRow]:
    return [
        SweepRow(
            rf=outcome.info['rf'], arch=outcome.info['arch'],
            train_loss=r['train_loss'], test_loss=r['test_loss'],
            macro_pr_auc=r['macro_pr_auc'], f1_classical=r['f1_classical'], f1_posneg=r['f1_posneg'],
            epoch=r['epoch'],
        )
        for r in outcome.report.history
    ]


def summarize_sweep(outcomes: List[RunOutcome], sweep_dir: Path, failed: List[int]) -> SweepSummary:
    """Kendall τ of final train loss against RF, and where test loss bottoms out."""
    ordered = sorted(outcomes, key=lambda o: o.info['rf'])
    rfs = [o.info['rf'] for o in ordered]
    train_losses = [o.report.final['train_loss'] for o in ordered]
    test_losses = [o.report.final['test_loss'] for o in ordered]

    tau = None
    if len(ordered) >= 2:
        statistic = kendalltau(rfs, train_losses)[0]
        tau = None if np.isnan(statistic) else float(statistic)
    best = int(np.argmin(test_losses)) if test_losses else 0
    return SweepSummary(
        sweep_dir=str(sweep_dir),
        rfs=rfs,
        final_train_loss=train_losses,
        final_test_loss=test_losses,
        kendall_tau_train_loss=tau,
        min_test_loss_rf=rfs[best] if rfs else 0,
        largest_rf_above_min=bool(test_losses) and test_losses[-1] > test_losses[best],
        failed=failed,
    )


def _sweep_worker(cfg_json: str, run_id: str) -> RunOutcome:
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    return run_experiment(cfg, register=False, run_id=run_id)


def _failed_run_info(cfg: ExperimentConfig, run_id: str) -> RunInfo:
    now = datetime.timestamp(datetime.now())
    return RunInfo(
        run_id=run_id, arch=cfg.arch, rf=compute_rf(cfg.build_arch(1)).max_rf, status='failed',
        created_timestamp=now, last_accessed_timestamp=now,
    )


def run_sweep(
    cfg: ExperimentConfig,
    values: Optional[List[int]] = None,
    parallel: Optional[int] = None,
) -> SweepSummary:
    """One run per value, sequentially unless `parallel` > 1.

    `sweep.csv` is rewritten after every finished run. A failed run is
    logged and skipped; the first failure is re-raised once the remaining
    runs are done.
    """
    values = list(values if values is not None else cfg.sweep.values)
    parallel = parallel or cfg.sweep.parallel
    stamp = datetime.now().strftime('%Y%m%d-%H%M%S')
    sweep_id = f"{stamp}-{hashlib.sha1(cfg.to_yaml().encode('utf-8')).hexdigest()[:8]}"
    sweep_dir = cfg.resolved_output_dir / "sweeps" / sweep_id
    sweep_dir.mkdir(parents=True, exist_ok=True)
    (sweep_dir / "config.yaml").write_text(cfg.to_yaml())

    configs = [cfg.with_value(v) for v in values]
    for c in configs:
        c.build_arch(1)     # reject out-of-range values before any training

    outcomes: List[RunOutcome] = []
    failures: List[Tuple[int, BaseException]] = []

    def collect(outcome: RunOutcome) -> None:
        outcomes.append(outcome)
        rows = [row for o in sorted(outcomes, key=lambda o: o.info['rf']) for row in sweep_rows(o)]
        pd.DataFrame(rows, columns=SWEEP_COLUMNS).to_csv(sweep_dir / "sweep.csv", index=False, float_format='%.10g')

    if parallel > 1:
        dataset_cfg = cfg.dataset
        if dataset_cfg.kind == 'synthetic':
            load_dataset(dataset_cfg)   # fill the cache once before the workers start
        manager = RunManager(cfg.resolved_output_dir)
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = {}
            for c in configs:
                run_id = RunManager.make_run_id(c.to_yaml())
                futures[pool.submit(_sweep_worker, c.model_dump_json(), run_id)] = (c, run_id)
            for future in as_completed(futures):
                c, run_id = futures[future]
                try:
                    outcome = future.result()
                except Exception as e:
                    logger.error(f"Sweep value {c.value} failed: {e}")
                    manager.register(_failed_run_info(c, run_id))
                    failures.append((c.value, e))
                    continue
                manager.register(outcome.info)
                collect(outcome)
    else:
        dataset = load_dataset(cfg.dataset)
        for c in configs:
            try:
                collect(run_experiment(c, dataset=dataset))
            except Exception as e:
                logger.error(f"Sweep value {c.value} failed: {e}")
                failures.append((c.value, e))

    summary = summarize_sweep(outcomes, sweep_dir, [value for value, _ in failures])
    (sweep_dir / "sweep_summary.json").write_text(json.dumps(summary.model_dump(), indent=4))
    logger.info(f"Sweep finished: {len(outcomes)} runs, Kendall tau(train loss, RF) = {summary.kendall_tau_train_loss}")
    if failures:
        raise failures[0][1]
    return summary

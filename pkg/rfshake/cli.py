"""Command line: `python -m rfshake {analyze,train,eval,sweep}`.

Exit codes: 0 success, 2 invalid arguments/config/missing files, 3 diverged
training.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from loguru import logger
from pydantic import ValidationError

from rfshake.architectures import build_spec
from rfshake.data import load_dataset
from rfshake.errors import (
    ArgumentError, ConfigError, ContainerFormatError, MetricError, TrainingDivergedError,
)
from rfshake.experiment import ExperimentConfig, run_experiment, run_sweep
from rfshake.rf_analysis import compute_rf, format_rf_table, rf_report_frame, rf_table, vgg_rf_table
from rfshake.settings import configure_logging
from rfshake.training import evaluate, load_checkpoint

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3


def cmd_analyze(args: argparse.Namespace) -> int:
    if args.all:
        table = vgg_rf_table() if args.arch == 'vgg' else rf_table()
        label = "removed" if args.arch == 'vgg' else "rho"
        print(f"{label:>8} {'rf':>6}")
        for value, rf in table.items():
            print(f"{value:>8} {rf:>6}")
        return EXIT_OK

    if args.arch == 'vgg':
        if args.rho is not None:
            raise ArgumentError("vgg takes --removed, not --rho")
        value = args.removed if args.removed is not None else 0
    else:
        if args.removed is not None:
            raise ArgumentError(f"{args.arch} takes --rho, not --removed")
        if args.rho is None:
            raise ArgumentError(f"{args.arch} needs --rho")
        value = args.rho

    report = compute_rf(build_spec(args.arch, value, args.n_classes))
    print(format_rf_table(report))
    if args.csv:
        rf_report_frame(report).to_csv(args.csv, index=False)
        logger.info(f"Wrote {len(report.traces)} layer rows to {args.csv}")
    return EXIT_OK


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_yaml(args.config)
    if getattr(args, 'seed', None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, 'output_dir', None) is not None:
        cfg = cfg.model_copy(update={'output_dir': Path(args.output_dir)})
    return cfg


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    outcome = run_experiment(cfg)
    report = outcome.report
    print(f"run {outcome.info['run_id']} ({outcome.info['arch']}, RF {outcome.info['rf']}) -> {outcome.run_dir}")
    for name, mean in report.window_mean.items():
        print(f"  {name:<14} {mean:.4f} ± {report.window_std[name]:.4f}  (last {report.eval_window} epochs)")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    checkpoint = Path(args.checkpoint)
    if not checkpoint.exists():
        raise FileNotFoundError(f"checkpoint not found: {checkpoint}")

    dataset = load_dataset(cfg.dataset)
    model = load_checkpoint(checkpoint)
    if model.arch_spec.n_classes != dataset.n_classes:
        raise ConfigError(
            f"checkpoint predicts {model.arch_spec.n_classes} classes, dataset has {dataset.n_classes}"
        )
    loss, report = evaluate(model, dataset.test, cfg.train.batch_size, cfg.train.threshold)
    print(f"{model.arch_spec.name} @ step {model.step_count}")
    print(f"  test_loss      {loss:.4f}")
    print(f"  macro_pr_auc   {report.macro_pr_auc:.4f}")
    print(f"  f1_classical   {report.macro_f1_classical:.4f}")
    print(f"  f1_posneg      {report.macro_f1_posneg:.4f}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    summary = run_sweep(cfg, values=args.values, parallel=args.parallel)
    print(f"sweep -> {summary.sweep_dir}")
    for rf, train_loss, test_loss in zip(summary.rfs, summary.final_train_loss, summary.final_test_loss):
        print(f"  rf {rf:>4}  train_loss {train_loss:.4f}  test_loss {test_loss:.4f}")
    print(f"  kendall tau (train loss vs rf): {summary.kendall_tau_train_loss}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfshake", description="Receptive-field regularized CNNs for spectrogram tagging")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="cmd", required=True)

    pa = sub.add_parser("analyze", help="per-layer receptive field table")
    pa.add_argument("--arch", choices=['cp_resnet', 'ss_resnet', 'vgg'], default='cp_resnet')
    pa.add_argument("--rho", type=int, default=None)
    pa.add_argument("--removed", type=int, default=None, help="removed conv layers (vgg)")
    pa.add_argument("--n-classes", type=int, default=10)
    pa.add_argument("--csv", type=str, default=None, help="also write the layer rows to this CSV")
    pa.add_argument("--all", action="store_true", help="print the RF for every rho (or removal count)")
    pa.set_defaults(func=cmd_analyze)

    pt = sub.add_parser("train", help="train one configuration")
    pt.add_argument("config", type=str)
    pt.add_argument("--seed", type=int, default=None)
    pt.add_argument("--output-dir", type=str, default=None)
    pt.set_defaults(func=cmd_train)

    pe = sub.add_parser("eval", help="evaluate a checkpoint on the config's test split")
    pe.add_argument("config", type=str)
    pe.add_argument("--checkpoint", type=str, required=True)
    pe.set_defaults(func=cmd_eval)

    ps = sub.add_parser("sweep", help="train one model per rho (or removal count)")
    ps.add_argument("config", type=str)
    ps.add_argument("--values", type=int, nargs="+", default=None)
    ps.add_argument("--parallel", type=int, default=None)
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--output-dir", type=str, default=None)
    ps.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else None)
    try:
        return args.func(args)
    except TrainingDivergedError as e:
        logger.error(f"Training diverged: {e}")
        return EXIT_DIVERGED
    except (ArgumentError, ConfigError, ContainerFormatError, MetricError, ValidationError, FileNotFoundError) as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

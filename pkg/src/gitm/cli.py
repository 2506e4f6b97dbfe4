"""Command-line entry point: ``gitm {train,simulate,sweep,plot}``."""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from .config import ConfigError, ScenarioConfig, load_config
from .dataset import build_training_set, prepare_dataset, read_dataset_csv
from .harness import run_scenario, sweep_malicious, write_table
from .plots import MissingColumnError, emit_plots
from .synthetic import mixed_training_set

log = logging.getLogger("gitm")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _config(args) -> ScenarioConfig:
    overrides = {"seed": args.seed, "malicious_pct": args.malicious_pct}
    if args.config:
        return load_config(args.config, **overrides)
    return ScenarioConfig(**{k: v for k, v in overrides.items() if v is not None})


def _cmd_train(args, cfg: ScenarioConfig, out: Path) -> None:
    if args.data:
        vectors, _, ids, rounds = read_dataset_csv(args.data)
        labeled = prepare_dataset(vectors, ids, rounds, cfg.variance_target, cfg.max_components, cfg.seed)
        training_set = build_training_set(labeled)
    else:
        rng = np.random.default_rng(cfg.seed)
        training_set = mixed_training_set(args.synthetic, length=cfg.vector_len, rng=rng)
    model = ae.build_model(cfg.autoencoder_config(), cfg.seed)
    # full passes; the per-epoch batch budget only applies inside simulations
    stats = ae.train(model, training_set, seed=cfg.seed, batches_per_epoch=0)
    tau_rec, tau_strict = ae.calibrate_thresholds(model, training_set)
    write_table(
        out / "training.csv",
        ("epoch",) + ae.TrainStats.COLUMNS,
        ([row["epoch"], *(row[c] for c in ae.TrainStats.COLUMNS)] for row in stats.rows()),
    )
    (out / "model.json").write_text(model.dumps())
    log.info("trained on %d vectors: tau_rec=%.6f tau_strict=%.6f", len(training_set), tau_rec, tau_strict)


def _cmd_simulate(args, cfg: ScenarioConfig, out: Path) -> None:
    result = run_scenario(cfg, out)
    s = result.summary
    log.info(
        "security rate %.3f, attacks %d, FND %d, HND %d, throughput %d",
        s.security_rate, s.total_attacks, s.fnd, s.hnd, s.throughput,
    )


def _cmd_sweep(args, cfg: ScenarioConfig, out: Path) -> None:
    _, aggregates = sweep_malicious(cfg, args.percentages, args.seeds, out)
    for row in aggregates:
        if row[1] == "mean":
            log.info("%5.1f%% malicious: rate %.3f attacks %.1f HND %.1f", row[0], row[2], row[3], row[5])


def _cmd_plot(args, cfg: ScenarioConfig, out: Path) -> None:
    training = args.training or (out / "training.csv")
    sweep = args.sweep or (out / "sweep.csv")
    training = training if Path(training).exists() else None
    sweep = sweep if Path(sweep).exists() else None
    if training is None and sweep is None:
        raise FileNotFoundError(f"no training.csv or sweep.csv in {out}")
    for path in emit_plots(out, training, sweep):
        log.info("wrote %s", path)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value scenario file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out-dir", default="out", help="directory for CSV, JSON and SVG outputs")
    common.add_argument("--malicious-pct", type=float, help="override the malicious percentage")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gitm", description="Trust management simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", parents=[common], help="train one autoencoder")
    p.add_argument("--data", help="dataset CSV (v1..vL[,label,device_id,round]); synthetic if omitted")
    p.add_argument("--synthetic", type=int, default=500, help="synthetic vector count")
    sub.add_parser("simulate", parents=[common], help="run one scenario")
    p = sub.add_parser("sweep", parents=[common], help="sweep the malicious percentage")
    p.add_argument("--percentages", type=float, nargs="+", default=[10, 20, 30, 40, 50])
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p = sub.add_parser("plot", parents=[common], help="render SVG charts")
    p.add_argument("--training", help="training CSV (default: OUT_DIR/training.csv)")
    p.add_argument("--sweep", help="sweep CSV (default: OUT_DIR/sweep.csv)")
    return parser


_COMMANDS = {"train": _cmd_train, "simulate": _cmd_simulate, "sweep": _cmd_sweep, "plot": _cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)
    warnings.simplefilter("default")
    try:
        cfg = _config(args)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except ae.TrainingDivergedError as exc:
        log.error("training diverged: %s", exc)
        return EXIT_DIVERGED
    except (MissingColumnError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

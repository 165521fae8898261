"""Micro-Net command line: architecture summaries, audits, training and evaluation."""
import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import config
from core.errors import (AnalysisError, ConfigError, DimensionError, GraphConstructionError, IntegrityError,
                         NumericalError, ParameterError, ParseError, ValidationError)
from analysis import receptive_field as rf
from core.log import configure_logging, get_logger
from core.run_config import RunConfig, apply_overrides, load_run_config, write_resolved
from data.dataset import load_dataset, write_dataset
from data.manifest import DatasetManifest, split
from data.pnm import load_image, save_mask
from data.synthetic import gen_synthetic
from metrics import confusion
from network import summary
from network.architecture import ArchitectureSpec, build_architecture, resolve_architecture
from network.audit import audit_report, compression_ratio
from training.checkpoint import checkpoint_load
from training.ledger import RunLedger
from training.trainer import predict_labels, train, validate

logger = get_logger("CLI")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

USAGE_ERRORS = (ConfigError, ValidationError, ParseError, IntegrityError, DimensionError, ParameterError,
                GraphConstructionError, AnalysisError, OSError)

LOG_NAME = "train_log.csv"


def _require(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _graph_for(arch_name: str):
    return build_architecture(resolve_architecture(arch_name))


# -- architecture commands ----------------------------------------------------

def cmd_summarize(args) -> int:
    rows = summary.summarize(_graph_for(args.arch), input_size=args.input_size)
    if args.csv:
        Path(args.csv).write_text(summary.to_csv(rows))
        logger.info(f"Wrote {len(rows)} rows to {args.csv}")
    text = summary.to_csv(rows) if args.format == "csv" else summary.to_text(rows) + "\n"
    print(text, end="")
    return EXIT_OK


def cmd_count_params(args) -> int:
    graph = _graph_for(args.arch)
    baseline = _graph_for(args.baseline)
    count, base_count = graph.count_params(), baseline.count_params()
    print(f"{args.arch}: {count:,} params ({count / 1e6:.2f}M)")
    print(f"{args.baseline}: {base_count:,} params ({base_count / 1e6:.2f}M)")
    print(f"compression {args.baseline}/{args.arch}: {compression_ratio(base_count, count):.2f}")
    return EXIT_OK


def cmd_audit(args) -> int:
    print(audit_report())
    return EXIT_OK


def cmd_analyze_rf(args) -> int:
    spec = resolve_architecture(args.arch)
    rows = rf.rf_report(spec)
    if args.csv:
        Path(args.csv).write_text(rf.to_csv(rows))
        logger.info(f"Wrote receptive-field report to {args.csv}")
    if args.format == "text":
        print(rf.to_text(rows, spec.variant))
    else:
        print(rf.to_csv(rows), end="")
    return EXIT_OK


# -- data commands ------------------------------------------------------------

def cmd_gen_synthetic(args) -> int:
    patches = gen_synthetic(args.count, args.size, args.seed)
    manifest = split(DatasetManifest(patches, seed=args.seed), args.fraction, args.seed)
    path = write_dataset(args.out, manifest)
    print(f"wrote {len(manifest)} patches ({len(manifest.train)} train / {len(manifest.val)} val) to {path.parent}")
    return EXIT_OK


# -- training -----------------------------------------------------------------

def _resolve_run(args) -> RunConfig:
    run = load_run_config(_require(args.config, "run config")) if args.config else RunConfig()
    architecture = None
    if args.arch:
        architecture = resolve_architecture(args.arch)
    return apply_overrides(run, {
        "name": args.name,
        "architecture": architecture,
        "training.epochs": args.epochs,
        "training.seed": args.seed,
        "training.batch_size": args.batch_size,
        "training.learning_rate": args.learning_rate,
        "training.precision": args.precision,
        "data.data_dir": args.data,
    })


def _load_manifest(run: RunConfig):
    if run.data.data_dir:
        return load_dataset(_require(run.data.data_dir, "data directory"), run.data.patch_size,
                            run.data.train_fraction, run.training.seed)
    patches = gen_synthetic(run.data.synthetic_count, run.data.synthetic_size, run.training.seed)
    return split(DatasetManifest(patches, seed=run.training.seed), run.data.train_fraction, run.training.seed)


def cmd_train(args) -> int:
    run = _resolve_run(args)
    out_dir = Path(args.out)
    write_resolved(run, out_dir)

    training = run.training
    if not Path(training.checkpoint_path).is_absolute():
        training = replace(training, checkpoint_path=str(out_dir / training.checkpoint_path))
    graph = build_architecture(run.architecture)
    manifest = _load_manifest(run)

    ledger = RunLedger(out_dir)
    run_id = ledger.start_run(run.name, run.architecture.variant, training.seed, run.to_dict())

    def record(entry):
        ledger.record_epoch(run_id, entry.epoch, entry.loss, entry.miou, entry.acc, entry.seconds)

    try:
        history = train(graph, manifest, training, log_path=out_dir / LOG_NAME, on_epoch=record)
    except NumericalError:
        ledger.finish_run(run_id, "diverged")
        raise
    except Exception:
        ledger.finish_run(run_id, "failed")
        raise
    last = history[-1] if history else None
    ledger.finish_run(run_id, "completed", *(last.loss, last.miou, last.acc) if last else ())
    if last is not None:
        shown = "" if last.miou is None else f", miou {last.miou:.4f}, acc {last.acc:.4f}"
        print(f"trained {len(history)} epochs: loss {last.loss:.4f}{shown}")
    print(f"log: {out_dir / LOG_NAME}")
    print(f"checkpoint: {training.checkpoint_path}")
    return EXIT_OK


def _graph_from_checkpoint(path):
    checkpoint = checkpoint_load(_require(path, "checkpoint"))
    meta = checkpoint.metadata
    if "architecture" not in meta:
        raise ConfigError(f"{path} does not record its architecture")
    spec = ArchitectureSpec.from_dict(meta["architecture"])
    graph = build_architecture(spec, meta.get("in_channels", 3), meta.get("n_classes", config.N_CLASSES))
    graph.set_params(checkpoint.params)
    return graph


def cmd_eval(args) -> int:
    graph = _graph_from_checkpoint(args.checkpoint)
    manifest = load_dataset(_require(args.data, "data directory"), args.patch_size, seed=args.seed)
    patches = manifest.patches if args.split == "all" else manifest.subset(args.split)
    if not patches:
        raise ValidationError(f"no '{args.split}' patches in {args.data}")
    cm = validate(graph, patches)
    if args.csv:
        Path(args.csv).write_text(confusion.to_csv(cm))
        logger.info(f"Wrote per-class IOU to {args.csv}")
    print("miou,acc")
    print(f"{confusion.miou(cm):.6f},{confusion.acc(cm):.6f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    graph = _graph_from_checkpoint(args.checkpoint)
    dtype = next(iter(graph.params.values())).dtype
    images = sorted(_require(args.images, "image directory").glob("*.ppm"))
    if not images:
        raise ValidationError(f"no .ppm images under {args.images}")
    out_dir = Path(args.out)
    for path in images:
        labels = predict_labels(graph, load_image(path).astype(dtype))
        save_mask(out_dir / f"{path.stem}.pgm", labels)
    print(f"wrote {len(images)} masks to {out_dir}")
    return EXIT_OK


def cmd_runs(args) -> int:
    ledger = RunLedger(url=args.db) if args.db else RunLedger(_require(args.out, "run directory"))
    runs = ledger.list_runs()
    if not runs:
        print("no runs recorded")
        return EXIT_OK
    for run in runs:
        metrics = "" if run["final_miou"] is None else f" miou {run['final_miou']:.4f} acc {run['final_acc']:.4f}"
        loss = "" if run["final_loss"] is None else f" loss {run['final_loss']:.4f}"
        print(f"#{run['id']} {run['name']} {run['variant']} seed {run['seed']} {run['status']} "
              f"({run['epochs']} epochs){loss}{metrics}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="micronet", description=__doc__)
    parser.add_argument("--log-level", default=config.MICRONET_LOG_LEVEL,
                        help="logging level (default from MICRONET_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("summarize", help="per-layer architecture table")
    p.add_argument("--arch", default="micro", help="preset name or architecture JSON file")
    p.add_argument("--input-size", type=int, default=config.PATCH_SIZE)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--csv", help="also write the CSV table to this file")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("count-params", help="parameter counts and compression ratio")
    p.add_argument("--arch", default="micro")
    p.add_argument("--baseline", default="unet")
    p.set_defaults(func=cmd_count_params)

    p = sub.add_parser("audit", help="check every preset against the published counts")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--out", default="runs/latest", help="output directory")
    p.add_argument("--name")
    p.add_argument("--arch")
    p.add_argument("--data", help="dataset directory (default: generated synthetic tiles)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--precision", choices=("float32", "float64"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="mIOU and ACC of a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--patch-size", type=int)
    p.add_argument("--split", choices=("val", "train", "all"), default="val")
    p.add_argument("--seed", type=int, default=0, help="split seed when the dataset has no manifest")
    p.add_argument("--csv", help="write per-class IOU to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write predicted masks for a directory of images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("analyze-rf", help="receptive-field and gridding report")
    p.add_argument("--arch", default="micro")
    p.add_argument("--format", choices=("text", "csv"), default="csv")
    p.add_argument("--csv", help="also write the CSV report to this file")
    p.set_defaults(func=cmd_analyze_rf)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic aerial-style dataset")
    p.add_argument("--count", type=int, default=config.SYNTHETIC_COUNT)
    p.add_argument("--size", type=int, default=config.SYNTHETIC_SIZE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fraction", type=float, default=config.TRAIN_FRACTION)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("runs", help="list runs recorded in the ledger")
    p.add_argument("--out", default="runs/latest", help="run directory holding the ledger")
    p.add_argument("--db", help="database URL (overrides --out)")
    p.set_defaults(func=cmd_runs)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except NumericalError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except USAGE_ERRORS as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())

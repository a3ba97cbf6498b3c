"""Command-line entry point.

Subcommands: gen-synth, pretrain, train-downstream, evaluate, gradcheck,
ablate-augment, ablate-labels. Settings resolve as defaults, then the
``--config`` file, then explicit flags.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import SyntheticSpec, gen_synthetic, load_manifest, split_dataset, split_pool, write_dataset
from .diffcore import stream
from .errors import CheckpointError, ConfigError, ParseError
from .training import RunConfig, load_checkpoint, load_config, save_checkpoint
from .training.loops import (build_encoder, build_head, evaluate, model_checkpoint, pretrain, restore,
                             train_downstream)

log = logging.getLogger("pcdual")

LABEL_FRACTIONS = (0.10, 0.05, 0.01)


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--task", choices=("cls", "seg"))
    p.add_argument("--points", type=int, choices=(512, 1024, 2048))
    p.add_argument("--config", type=Path, help="key = value settings file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, default=Path("runs/latest"))
    p.add_argument("--folds", type=int, help="k-fold protocol: number of folds")
    p.add_argument("--fold", type=int, help="k-fold protocol: which fold is the test part")
    if data:
        p.add_argument("--data", type=Path, required=True, help="manifest: '<relative path> <label>' per line")
        p.add_argument("--test-data", type=Path, help="fixed test manifest; --data is then split into A/B only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcdual", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic vessel dataset")
    _common(p, data=False)
    p.add_argument("--healthy", type=int, default=8)
    p.add_argument("--aneurysm", type=int, default=8)
    p.add_argument("--cloud-points", type=int, default=256)
    p.add_argument("--bump-fraction", type=float, default=0.3)

    p = sub.add_parser("pretrain", help="contrastive pretraining on the unlabeled pool")
    _common(p)
    p.add_argument("--resume", type=Path, help="encoder checkpoint to continue from")

    p = sub.add_parser("train-downstream", help="train the task head on frozen representations")
    _common(p)
    p.add_argument("--encoder", type=Path, required=True)

    p = sub.add_parser("evaluate", help="metrics on the held-out test split")
    _common(p)
    p.add_argument("--encoder", type=Path, required=True)
    p.add_argument("--head", type=Path, required=True)

    p = sub.add_parser("gradcheck", help="run the central-difference gradient suite")
    _common(p, data=False)

    p = sub.add_parser("ablate-augment", help="pretrain + downstream for each augmentation kind")
    _common(p)

    p = sub.add_parser("ablate-labels", help="pretrain on A+B, train heads on 10%%, 5%%, 1%% labels")
    _common(p)
    return parser


def resolve_config(args) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        config = load_config(args.config, config)
    return config.with_overrides(task=args.task, points=args.points, seed=args.seed, folds=args.folds,
                                 fold=args.fold)


def _splits(args, config: RunConfig):
    """Pretraining pool A+B, labeled part B and the test set."""
    dataset = load_manifest(args.data)
    if args.test_data:
        unlabeled, labeled = split_pool(dataset, config.split_spec())
        test = load_manifest(args.test_data, "test")
    else:
        unlabeled, labeled, test_idx = split_dataset(dataset, config.split_spec())
        test = dataset.subset(test_idx, "test")
    pool = dataset.subset(np.sort(np.concatenate([unlabeled, labeled])), "pool")
    return pool, dataset.subset(labeled, "labeled"), test


def _load_encoder(path: Path, config: RunConfig):
    ckpt = load_checkpoint(path)
    encoder = build_encoder(config)
    try:
        restore(encoder, ckpt)
    except CheckpointError as exc:
        raise CheckpointError(f"{path}: incompatible with task {config.task!r} ({exc})") from None
    return encoder.eval(), ckpt


def _pipeline(args, config: RunConfig, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    pool, labeled, test = _splits(args, config)
    with open(out / "records.jsonl", "w", encoding="utf-8") as sink:
        pre = pretrain(pool, config, records=sink)
        save_checkpoint(model_checkpoint(pre.model, config, config.epochs), out / "encoder.ckpt")
        head = train_downstream(pre.model, labeled, config, records=sink)
        save_checkpoint(model_checkpoint(head.model, config, config.head_epochs), out / "head.ckpt")
        report = evaluate(pre.model, head.model, test, config)
        sink.write(report.to_record() + "\n")
    return report.values


def cmd_gen_synth(args, config: RunConfig) -> int:
    spec = SyntheticSpec(args.healthy, args.aneurysm, args.cloud_points, args.bump_fraction)
    dataset = gen_synthetic(spec, stream(config.seed, "synthetic"))
    manifest = write_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} clouds; manifest {manifest}")
    return 0


def cmd_pretrain(args, config: RunConfig) -> int:
    pool, _, _ = _splits(args, config)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "config.txt").write_text(config.canonical(), encoding="utf-8")
    resume = load_checkpoint(args.resume) if args.resume else None
    target = args.out / "encoder.ckpt"

    def snapshot(epoch, encoder, optimizer):
        save_checkpoint(model_checkpoint(encoder, config, epoch, optimizer), target)

    mode = "a" if resume else "w"
    with open(args.out / "pretrain.jsonl", mode, encoding="utf-8") as sink:
        result = pretrain(pool, config, resume=resume, records=sink, on_epoch=snapshot)
    print(f"pretrained on {len(pool)} clouds; final loss {result.losses[-1] if result.records else float('nan'):.5f}")
    print(f"checkpoint {target}")
    return 0


def cmd_train_downstream(args, config: RunConfig) -> int:
    _, labeled, _ = _splits(args, config)
    encoder, _ = _load_encoder(args.encoder, config)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "downstream.jsonl", "w", encoding="utf-8") as sink:
        result = train_downstream(encoder, labeled, config, records=sink)
    target = args.out / "head.ckpt"
    save_checkpoint(model_checkpoint(result.model, config, config.head_epochs, result.optimizer), target)
    print(f"trained {config.task} head on {len(labeled)} clouds; final loss {result.losses[-1]:.5f}")
    print(f"checkpoint {target}")
    return 0


def cmd_evaluate(args, config: RunConfig) -> int:
    _, _, test = _splits(args, config)
    encoder, _ = _load_encoder(args.encoder, config)
    head = build_head(config, encoder)
    restore(head, load_checkpoint(args.head))
    report = evaluate(encoder, head, test, config)
    print(report.to_table())
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "metrics.jsonl", "a", encoding="utf-8") as sink:
        sink.write(report.to_record() + "\n")
    return 0


def cmd_gradcheck(args, config: RunConfig) -> int:
    from .gradsuite import THRESHOLD, run_suite

    failed = 0
    for name, err in run_suite(config.seed).items():
        ok = err < THRESHOLD
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<28} max rel err {err:.2e}")
    return 1 if failed else 0


def cmd_ablate_augment(args, config: RunConfig) -> int:
    rows = []
    for kind in ("rotation", "perturbation", "jitter+perturbation", "jitter"):
        values = _pipeline(args, replace(config, augmentation=kind), args.out / kind.replace("+", "_"))
        rows.append((kind, values))
    _print_rows("augmentation", rows)
    return 0


def cmd_ablate_labels(args, config: RunConfig) -> int:
    rows = []
    for frac in LABEL_FRACTIONS:
        values = _pipeline(args, replace(config, labeled_fraction=frac), args.out / f"labels_{frac:g}")
        rows.append((f"{100 * frac:g}%", values))
    _print_rows("labeled", rows)
    return 0


def _print_rows(title: str, rows) -> None:
    keys = list(rows[0][1])
    print("  ".join([f"{title:<22}"] + [f"{k:>14}" for k in keys]))
    for name, values in rows:
        print("  ".join([f"{name:<22}"] + [f"{values[k]:>14.4f}" for k in keys]))


COMMANDS = {
    "gen-synth": cmd_gen_synth,
    "pretrain": cmd_pretrain,
    "train-downstream": cmd_train_downstream,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "ablate-augment": cmd_ablate_augment,
    "ablate-labels": cmd_ablate_labels,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except (ConfigError, ParseError, CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Trainer CLI: fit the classifier, export weights, run the parity check."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from .export import export_weights, parity_check
from .model import GraspNet
from .train import TrainConfig, train


def cmd_train(args) -> int:
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        base_lr=args.lr,
        momentum=args.momentum,
        lr_decay=args.lr_decay,
        decay_period=args.decay_period,
        dropout=args.dropout,
        augment=not args.no_augment,
        split_seed=args.seed,
    )
    result = train(args.manifest, cfg, log_path=args.log)
    if result.metrics:
        last = result.metrics[-1]
        print(f"epoch {last.epoch}: train_acc {last.train_acc:.3f} val_acc {last.val_acc:.3f}")
    export_weights(result.model, args.out)
    if args.checkpoint:
        torch.save(result.model.state_dict(), args.checkpoint)
    print(f"weights written to {args.out}")
    return 0


def cmd_parity(args) -> int:
    state = torch.load(args.checkpoint, weights_only=True)
    model = GraspNet(ascend_width=state["ascend.weight"].shape[0])
    model.load_state_dict(state)
    patches = [np.load(p) for p in sorted(Path(args.patch_dir).glob("*.npy"))]
    report = parity_check(model, args.weights, patches)
    print(f"{report.n_patches} patches, max |deviation| {report.max_abs_deviation:.2e}")
    return 0 if report.ok else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="grasptrain", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train on a patch manifest and export weights")
    t.add_argument("manifest")
    t.add_argument("out", help="output weight file (.gnwb)")
    t.add_argument("--epochs", type=int, default=120)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--lr-decay", type=float, default=0.1)
    t.add_argument("--decay-period", type=int, default=60)
    t.add_argument("--dropout", type=float, default=0.5)
    t.add_argument("--no-augment", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--log", help="metrics CSV path")
    t.add_argument("--checkpoint", help="also save the torch state dict here")
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("parity", help="compare a checkpoint against exported weights")
    p.add_argument("checkpoint")
    p.add_argument("weights")
    p.add_argument("patch_dir")
    p.set_defaults(func=cmd_parity)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Training loop: SGD with momentum and a stepped learning-rate schedule.

The learning rate is multiplied by ``lr_decay`` every ``decay_period``
epochs.  One seed drives the object-wise split, weight init, shuffling, and
augmentation, so a fixed config reproduces its metrics log exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import PatchSet, SingleClassDatasetError, augment, load_manifest, split_by_object
from .model import GraspNet


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass
class TrainConfig:
    epochs: int = 120
    batch_size: int = 64
    base_lr: float = 0.01
    momentum: float = 0.9
    lr_decay: float = 0.1
    decay_period: int = 60
    dropout: float = 0.5
    augment: bool = True
    val_fraction: float = 0.2
    split_seed: int = 0
    ascend_width: int = 256

    def validate(self) -> None:
        if self.decay_period < 1:
            raise ValueError("decay_period must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    def lr_at(self, epoch: int) -> float:
        """Learning rate for a 1-based epoch number."""
        return self.base_lr * self.lr_decay ** ((epoch - 1) // self.decay_period)


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    train_acc: float
    val_acc: float


@dataclass
class TrainResult:
    model: GraspNet
    metrics: list[EpochMetrics] = field(default_factory=list)

    def write_csv(self, path) -> None:
        lines = ["epoch,lr,train_acc,val_acc"]
        for m in self.metrics:
            lines.append(f"{m.epoch},{m.lr:.10g},{m.train_acc:.6f},{m.val_acc:.6f}")
        Path(path).write_text("\n".join(lines) + "\n")


def _accuracy(model: GraspNet, x: torch.Tensor, y: torch.Tensor) -> float:
    was_training = model.training
    model.eval()
    with torch.no_grad():
        pred = model(x).argmax(dim=1)
    if was_training:
        model.train()
    return float((pred == y).float().mean())


def train(manifest_path, cfg: TrainConfig | None = None, log_path=None) -> TrainResult:
    """Fit the classifier on a patch manifest; returns model + metrics log."""
    cfg = cfg or TrainConfig()
    cfg.validate()
    data = load_manifest(manifest_path)
    if len(set(data.labels.tolist())) < 2:
        raise SingleClassDatasetError("manifest holds only one class")

    torch.manual_seed(cfg.split_seed)
    torch.use_deterministic_algorithms(True)
    rng = np.random.default_rng(cfg.split_seed)

    train_idx, val_idx = split_by_object(data, cfg.val_fraction, cfg.split_seed)
    val_x = torch.from_numpy(data.patches[val_idx].transpose(0, 3, 1, 2).copy())
    val_y = torch.from_numpy(data.labels[val_idx])

    model = GraspNet(ascend_width=cfg.ascend_width, dropout=cfg.dropout)
    optimizer = torch.optim.SGD(model.parameters(), lr=cfg.base_lr, momentum=cfg.momentum)
    loss_fn = nn.CrossEntropyLoss()

    result = TrainResult(model=model)
    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.lr_at(epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        order = rng.permutation(len(train_idx))
        correct = 0
        for start in range(0, len(order), cfg.batch_size):
            chosen = [train_idx[i] for i in order[start : start + cfg.batch_size]]
            batch = data.patches[chosen]
            if cfg.augment:
                batch = np.stack([augment(p, rng) for p in batch])
            x = torch.from_numpy(batch.transpose(0, 3, 1, 2).copy())
            y = torch.from_numpy(data.labels[chosen])
            optimizer.zero_grad()
            logits = model(x)
            loss = loss_fn(logits, y)
            if not math.isfinite(float(loss.detach())):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
            correct += int((logits.argmax(dim=1) == y).sum())
        result.metrics.append(
            EpochMetrics(
                epoch=epoch,
                lr=lr,
                train_acc=correct / len(train_idx),
                val_acc=_accuracy(model, val_x, val_y),
            )
        )
    model.eval()
    if log_path is not None:
        result.write_csv(log_path)
    return result

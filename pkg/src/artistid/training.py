"""Training loop: cross-entropy + Adam with early stopping on validation loss.

Each epoch shuffles the training clips with a seed derived from (run seed,
epoch), takes Adam steps batch by batch, then scores the validation set in
infer mode. Training stops when validation loss has not improved by more
than a small tolerance for `patience` consecutive epochs, and the weights
from the best validation epoch (not the last) are what the caller gets back.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .crnn import Checkpoint, Crnn
from .datasets import ClipSet, iter_batches
from .evaluation import confusion_matrix, weighted_f1
from .nn import Adam, softmax_cross_entropy

IMPROVEMENT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    clip_seconds: float
    seed: int = 0
    lr: float = 1e-4
    batch_size: int = 16
    max_epochs: int = 400
    patience: int = 10

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.clip_seconds <= 0:
            raise ValueError(f"clip_seconds must be > 0, got {self.clip_seconds}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_f1: float
    seconds: float


@dataclass
class EarlyStopping:
    """Tracks best validation loss and consecutive stale epochs."""

    patience: int
    tolerance: float = IMPROVEMENT_TOLERANCE
    best: float = math.inf
    best_epoch: int = -1
    stale: int = 0

    def update(self, loss: float, epoch: int = -1) -> bool:
        """Record one validation loss; True means stop now."""
        if loss < self.best - self.tolerance:
            self.best = loss
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def _epoch_validation(model: Crnn, val_clips: ClipSet, batch_size: int):
    """Mean loss and weighted F1 over the validation set, infer mode."""
    total_loss = 0.0
    preds = []
    for batch in iter_batches(val_clips, batch_size):
        logits, _ = model.forward(batch.inputs, train=False)
        loss, _ = softmax_cross_entropy(logits, batch.labels)
        total_loss += loss * len(batch.labels)
        preds.append(logits.argmax(axis=1))
    val_loss = total_loss / len(val_clips)
    cm = confusion_matrix(val_clips.labels, np.concatenate(preds), model.config.n_classes)
    return val_loss, weighted_f1(cm)


def _snapshot(model: Crnn) -> dict[str, np.ndarray]:
    tensors = {name: p.data.copy() for name, p in model.named_parameters()}
    tensors.update({name: buf.copy() for name, buf in model.named_buffers()})
    return tensors


def _restore(model: Crnn, tensors: dict[str, np.ndarray]) -> None:
    for name, p in model.named_parameters():
        p.data = tensors[name].copy()
    for name, _ in model.named_buffers():
        model.set_buffer(name, tensors[name].copy())


def train(model: Crnn, train_clips: ClipSet, val_clips: ClipSet,
          cfg: TrainConfig) -> tuple[Checkpoint, list[EpochStats]]:
    """Fit the model; returns the best-epoch checkpoint and full history.

    On return the model itself also holds the best-epoch weights.
    """
    if len(train_clips) == 0:
        raise ValueError("training set is empty")
    if len(val_clips) == 0:
        raise ValueError("validation set is empty")
    optimizer = Adam(model.parameters(), lr=cfg.lr)
    stopper = EarlyStopping(patience=cfg.patience)
    history: list[EpochStats] = []
    best_tensors = _snapshot(model)
    for epoch in range(1, cfg.max_epochs + 1):
        started = time.perf_counter()
        loss_sum = 0.0
        sample_count = 0
        for batch_index, batch in enumerate(
            iter_batches(train_clips, cfg.batch_size, seed=(cfg.seed, epoch), shuffle=True)
        ):
            if len(batch.labels) < 2:
                continue  # batch norm cannot normalize a single sample
            logits, _ = model.forward(batch.inputs, train=True)
            loss, dlogits = softmax_cross_entropy(logits, batch.labels)
            if not math.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch}, batch {batch_index}"
                )
            model.backward(dlogits)
            optimizer.step()
            loss_sum += loss * len(batch.labels)
            sample_count += len(batch.labels)
        train_loss = loss_sum / sample_count
        val_loss, val_f1 = _epoch_validation(model, val_clips, cfg.batch_size)
        if not math.isfinite(val_loss):
            raise FloatingPointError(f"non-finite validation loss at epoch {epoch}")
        history.append(EpochStats(epoch, train_loss, val_loss, val_f1,
                                  time.perf_counter() - started))
        improved = val_loss < stopper.best - stopper.tolerance
        should_stop = stopper.update(val_loss, epoch)
        if improved:
            best_tensors = _snapshot(model)
        if should_stop:
            break
    _restore(model, best_tensors)
    model.metadata = {
        "epoch": str(stopper.best_epoch),
        "best_val_loss": repr(stopper.best),
        "seed": str(cfg.seed),
    }
    return Checkpoint(config=model.config, tensors=best_tensors,
                      metadata=dict(model.metadata)), history


def write_history(history: list[EpochStats], path) -> None:
    """Tab-separated epoch table for downstream plotting."""
    path = Path(path)
    lines = ["epoch\ttrain_loss\tval_loss\tval_f1\tseconds"]
    for s in history:
        lines.append(f"{s.epoch}\t{s.train_loss!r}\t{s.val_loss!r}\t{s.val_f1!r}\t{s.seconds:.3f}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_history(path) -> list[EpochStats]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split("\t") != ["epoch", "train_loss", "val_loss", "val_f1", "seconds"]:
        raise ValueError(f"{path}: not a history table")
    out = []
    for line in lines[1:]:
        epoch, train_loss, val_loss, val_f1, seconds = line.split("\t")
        out.append(EpochStats(int(epoch), float(train_loss), float(val_loss),
                              float(val_f1), float(seconds)))
    return out

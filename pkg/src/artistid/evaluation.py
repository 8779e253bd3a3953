"""Frame-level and song-level evaluation, plus bottleneck embedding export.

Frame level treats every clip as an independent sample. Song level first
takes a majority vote over each track's frame predictions (ties broken by
summed softmax probability, then lowest class index) and scores one
prediction per track. Both levels report support-weighted F1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .crnn import Crnn
from .datasets import ClipSet
from .nn import softmax


def predict(model: Crnn, inputs: np.ndarray, batch_size: int = 32):
    """Infer-mode logits and bottlenecks for a clip array, in row order."""
    logits_parts, bottleneck_parts = [], []
    for start in range(0, len(inputs), batch_size):
        logits, bottleneck = model.forward(inputs[start: start + batch_size], train=False)
        logits_parts.append(logits)
        bottleneck_parts.append(bottleneck)
    return np.concatenate(logits_parts), np.concatenate(bottleneck_parts)


def confusion_matrix(true_labels, predicted_labels, n_classes: int) -> np.ndarray:
    """K x K counts; rows are true classes, columns predicted."""
    true_labels = np.asarray(true_labels)
    predicted_labels = np.asarray(predicted_labels)
    if true_labels.shape != predicted_labels.shape:
        raise ValueError("label arrays differ in length")
    for arr in (true_labels, predicted_labels):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"labels out of range for {n_classes} classes")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (true_labels, predicted_labels), 1)
    return cm


def per_class_metrics(cm: np.ndarray):
    """Per class: (precision, recall, f1, support); zero denominators score 0."""
    k = cm.shape[0]
    rows = []
    for i in range(k):
        tp = int(cm[i, i])
        col = int(cm[:, i].sum())
        row = int(cm[i, :].sum())
        precision = tp / col if col else 0.0
        recall = tp / row if row else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
        rows.append((precision, recall, f1, row))
    return rows


def weighted_f1(cm: np.ndarray) -> float:
    """Support-weighted mean of per-class F1 scores.

    Accumulated class by class in index order so results are reproducible
    bit for bit.
    """
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {cm.shape}")
    if cm.sum() <= 0:
        raise ValueError("confusion matrix is empty")
    numerator = 0.0
    total = 0
    for precision, recall, f1, support in per_class_metrics(cm):
        numerator += support * f1
        total += support
    return numerator / total


@dataclass
class EvalReport:
    level: str  # "frame" or "song"
    confusion: np.ndarray
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    weighted_f1: float
    context: dict[str, str] = field(default_factory=dict)
    class_names: list[str] | None = None

    def render(self) -> str:
        lines = [f"level={self.level}"]
        for key in sorted(self.context):
            lines.append(f"{key}={self.context[key]}")
        for i in range(len(self.f1)):
            name = self.class_names[i] if self.class_names else str(i)
            lines.append(
                f"class={name}\tprecision={self.precision[i]:.4f}\t"
                f"recall={self.recall[i]:.4f}\tf1={self.f1[i]:.4f}\tsupport={self.support[i]}"
            )
        lines.append(f"weighted_f1={self.weighted_f1!r}")
        return "\n".join(lines) + "\n"


def build_report(level: str, cm: np.ndarray, context: dict[str, str] | None = None,
                 class_names: list[str] | None = None) -> EvalReport:
    metrics = per_class_metrics(cm)
    return EvalReport(
        level=level,
        confusion=cm,
        precision=[m[0] for m in metrics],
        recall=[m[1] for m in metrics],
        f1=[m[2] for m in metrics],
        support=[m[3] for m in metrics],
        weighted_f1=weighted_f1(cm),
        context=dict(context or {}),
        class_names=class_names,
    )


def frame_eval(model: Crnn, clips: ClipSet, context: dict[str, str] | None = None,
               class_names: list[str] | None = None) -> EvalReport:
    if len(clips) == 0:
        raise ValueError("empty test set")
    logits, _ = predict(model, clips.inputs)
    preds = logits.argmax(axis=1)
    cm = confusion_matrix(clips.labels, preds, model.config.n_classes)
    return build_report("frame", cm, context, class_names)


def song_vote(track_ids, predictions, probabilities: np.ndarray | None = None) -> dict[int, int]:
    """Majority class per track; order of frames does not matter.

    Ties go to the candidate with the highest summed probability, then the
    lowest class index. Without probabilities, tied votes fall straight to
    the lowest index.
    """
    predictions = np.asarray(predictions)
    by_track: dict[int, list[int]] = {}
    for row, track_id in enumerate(track_ids):
        by_track.setdefault(int(track_id), []).append(row)
    votes: dict[int, int] = {}
    for track_id, rows in by_track.items():
        preds = predictions[rows]
        counts = np.bincount(preds)
        candidates = np.flatnonzero(counts == counts.max())
        if len(candidates) > 1 and probabilities is not None:
            sums = probabilities[rows][:, candidates].sum(axis=0)
            winner = candidates[int(np.argmax(sums))]  # argmax keeps lowest index on ties
        else:
            winner = candidates[0]
        votes[track_id] = int(winner)
    return votes


def song_eval(model: Crnn, clips: ClipSet, context: dict[str, str] | None = None,
              class_names: list[str] | None = None) -> EvalReport:
    if len(clips) == 0:
        raise ValueError("empty test set")
    logits, _ = predict(model, clips.inputs)
    probs = softmax(logits)
    preds = logits.argmax(axis=1)
    track_ids = [track_id for track_id, _ in clips.provenance]
    votes = song_vote(track_ids, preds, probs)
    true_by_track: dict[int, int] = {}
    for row, (track_id, _) in enumerate(clips.provenance):
        true_by_track.setdefault(track_id, int(clips.labels[row]))
    ordered = sorted(votes)
    cm = confusion_matrix(
        [true_by_track[t] for t in ordered],
        [votes[t] for t in ordered],
        model.config.n_classes,
    )
    return build_report("song", cm, context, class_names)


@dataclass(frozen=True)
class EmbeddingRecord:
    track_id: int
    artist: str
    clip_index: int
    vector: np.ndarray


def export_embeddings(model: Crnn, clips: ClipSet, out_path,
                      class_names: list[str] | None = None) -> int:
    """Write one bottleneck row per clip; returns the row count."""
    out_path = Path(out_path)
    _, bottlenecks = predict(model, clips.inputs)
    units = bottlenecks.shape[1] if len(clips) else model.config.gru_units[-1]
    header = ["track_id", "artist", "clip_index"] + [f"e{i}" for i in range(units)]
    lines = ["\t".join(header)]
    for row, (track_id, clip_index) in enumerate(clips.provenance):
        label = int(clips.labels[row])
        artist = class_names[label] if class_names else str(label)
        values = "\t".join(repr(float(v)) for v in bottlenecks[row])
        lines.append(f"{track_id}\t{artist}\t{clip_index}\t{values}")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(clips)


def read_embeddings(path) -> list[EmbeddingRecord]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty embeddings file")
    header = lines[0].split("\t")
    if header[:3] != ["track_id", "artist", "clip_index"]:
        raise ValueError(f"{path}: unexpected embeddings header")
    records = []
    for line in lines[1:]:
        parts = line.split("\t")
        records.append(
            EmbeddingRecord(
                track_id=int(parts[0]),
                artist=parts[1],
                clip_index=int(parts[2]),
                vector=np.array([float(v) for v in parts[3:]], dtype=np.float32),
            )
        )
    return records

"""Confusion matrix, mean IOU and pixel accuracy."""
import csv
import io
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from core.errors import UndefinedMetricError, ValidationError


@dataclass
class ConfusionMatrix:
    """counts[j, i] = pixels of true category j predicted as category i."""

    n_c: int
    counts: np.ndarray = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.n_c, self.n_c), dtype=np.int64)
        elif self.counts.shape != (self.n_c, self.n_c):
            raise ValidationError(f"counts must be {self.n_c}x{self.n_c}, got {self.counts.shape}")

    @property
    def true_totals(self) -> np.ndarray:
        """t_i: pixels of each category in the ground truth (row sums)."""
        return self.counts.sum(axis=1)

    @property
    def predicted_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.n_c != self.n_c:
            raise ValidationError(f"cannot merge {self.n_c}-class and {other.n_c}-class matrices")
        return ConfusionMatrix(self.n_c, self.counts + other.counts)


def _check_labels(labels: np.ndarray, n_c: int, what: str) -> None:
    bad = (labels < 0) | (labels >= n_c)
    if np.any(bad):
        where = tuple(int(v) for v in np.argwhere(bad)[0])
        value = labels[where]
        raise ValidationError(f"{what} label {value} at pixel {where} is outside [0, {n_c})")


def accumulate(cm: ConfusionMatrix, predicted, truth) -> ConfusionMatrix:
    """New matrix with one count added per pixel; `cm` is left untouched."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValidationError(f"prediction shape {predicted.shape} != truth shape {truth.shape}")
    if truth.size == 0:
        return ConfusionMatrix(cm.n_c, cm.counts.copy())
    _check_labels(truth, cm.n_c, "truth")
    _check_labels(predicted, cm.n_c, "predicted")
    flat = truth.astype(np.int64).ravel() * cm.n_c + predicted.astype(np.int64).ravel()
    counts = np.bincount(flat, minlength=cm.n_c * cm.n_c).reshape(cm.n_c, cm.n_c)
    return ConfusionMatrix(cm.n_c, cm.counts + counts)


def class_iou(cm: ConfusionMatrix) -> np.ndarray:
    """Per-category IOU; NaN where the category is absent from truth and prediction."""
    diag = np.diag(cm.counts).astype(np.float64)
    denom = cm.true_totals + cm.predicted_totals - diag
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, diag / np.where(denom > 0, denom, 1), np.nan)


def miou(cm: ConfusionMatrix) -> float:
    """Mean of n_ii / (t_i + sum_j n_ji - n_ii) over categories that occur."""
    if cm.total == 0:
        raise UndefinedMetricError("mIOU of an empty confusion matrix is undefined")
    ious = class_iou(cm)
    return float(np.mean(ious[~np.isnan(ious)]))


def acc(cm: ConfusionMatrix) -> float:
    """Trace over total."""
    if cm.total == 0:
        raise UndefinedMetricError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(cm.counts) / cm.total)


def evaluate(predict: Callable, patches: Iterable, n_c: int = 2) -> ConfusionMatrix:
    """Accumulate one validation-wide matrix; `predict(patch)` returns an (H, W) label map."""
    cm = ConfusionMatrix(n_c)
    for patch in patches:
        cm = accumulate(cm, predict(patch), patch.label)
    return cm


def to_csv(cm: ConfusionMatrix) -> str:
    """`class,iou` rows followed by the `miou,acc` summary."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["class", "iou"])
    for index, value in enumerate(class_iou(cm)):
        writer.writerow([index, "" if np.isnan(value) else f"{value:.6f}"])
    writer.writerow(["miou", "acc"])
    writer.writerow([f"{miou(cm):.6f}", f"{acc(cm):.6f}"])
    return buffer.getvalue()

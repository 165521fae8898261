"""Categorical cross-entropy over softmax outputs."""
from typing import Tuple

import numpy as np

import config
from core.errors import ValidationError
from engine.tensor import Tensor, check_axis


def one_hot(labels: np.ndarray, n_classes: int, dtype=np.float64) -> Tensor:
    """(N, H, W) integer labels -> (N, C, H, W) one-hot tensor."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValidationError(f"labels must lie in [0, {n_classes}), got range "
                              f"[{labels.min()}, {labels.max()}]")
    eye = np.eye(n_classes, dtype=dtype)
    return Tensor(np.moveaxis(eye[labels], -1, 1))


def _check_one_hot(y: np.ndarray) -> None:
    if not np.all((y == 0) | (y == 1)) or not np.all(y.sum(axis=1) == 1):
        bad = np.argwhere(~np.isclose(y.sum(axis=1), 1) | np.any((y != 0) & (y != 1), axis=1))
        where = tuple(int(v) for v in bad[0]) if len(bad) else None
        raise ValidationError(f"labels are not one-hot (first offending (n, h, w): {where})")


def cross_entropy_loss(probs: Tensor, labels: Tensor, clamp: float = config.LOG_CLAMP) -> Tuple[float, Tensor]:
    """Mean over pixels of -sum_c y_c log a_c, and its gradient w.r.t. the logits.

    With softmax outputs the logit gradient is (a - y) / (N*H*W).
    """
    for axis, want, got in zip(("batch", "channels", "height", "width"), probs.shape, labels.shape):
        check_axis(axis, want, got, "cross_entropy_loss labels")
    y = labels.data
    _check_one_hot(y)
    a = probs.data
    n, _, height, width = a.shape
    pixels = n * height * width
    log_a = np.log(np.maximum(a, clamp))
    loss = float(-(y * log_a).sum(dtype=np.float64) / pixels)
    grad = (a - y.astype(a.dtype, copy=False)) / pixels
    return loss, Tensor.frozen(grad)

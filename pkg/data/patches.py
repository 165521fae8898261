"""Labeled patches: cutting, reassembly and horizontal flips."""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from core.errors import DimensionError, ValidationError
from engine.tensor import Tensor


@dataclass(frozen=True, eq=False)
class LabeledPatch:
    """An image patch with its per-pixel category map and where it came from."""

    image: Tensor
    label: np.ndarray
    source: str = "image"
    row: int = 0
    col: int = 0

    def __post_init__(self):
        if self.image.shape[0] != 1 or self.image.shape[1] != 3:
            raise ValidationError(f"patch image must be (1, 3, H, W), got {self.image.shape}")
        if self.label.shape != self.image.shape[2:]:
            raise ValidationError(f"{self.patch_id}: label {self.label.shape} does not match "
                                  f"image {self.image.shape[2:]}")

    @property
    def patch_id(self) -> str:
        return f"{self.source}_{self.row:03d}_{self.col:03d}"

    @property
    def size(self) -> Tuple[int, int]:
        return self.label.shape


def cut_patches(image: Tensor, label: np.ndarray, patch_size: int, source: str = "image") -> List[LabeledPatch]:
    """Non-overlapping patch grid in row-major order."""
    label = np.asarray(label)
    _, _, height, width = image.shape
    if label.shape != (height, width):
        raise ValidationError(f"{source}: label {label.shape} does not match image {(height, width)}")
    for axis, size in (("height", height), ("width", width)):
        if size % patch_size:
            raise DimensionError(f"{source}: {axis} {size} is not divisible by patch size {patch_size}",
                                 axis=axis)
    patches = []
    for row in range(height // patch_size):
        for col in range(width // patch_size):
            rows = slice(row * patch_size, (row + 1) * patch_size)
            cols = slice(col * patch_size, (col + 1) * patch_size)
            patches.append(LabeledPatch(
                image=Tensor(image.data[:, :, rows, cols].copy()),
                label=label[rows, cols].copy(),
                source=source, row=row, col=col,
            ))
    return patches


def reassemble(patches: Sequence[LabeledPatch]) -> Tuple[Tensor, np.ndarray]:
    """Inverse of cut_patches for the patches of a single source."""
    if not patches:
        raise ValidationError("nothing to reassemble")
    ph, pw = patches[0].size
    rows = max(p.row for p in patches) + 1
    cols = max(p.col for p in patches) + 1
    if len(patches) != rows * cols:
        raise ValidationError(f"expected a full {rows}x{cols} grid, got {len(patches)} patches")
    image = np.zeros((1, 3, rows * ph, cols * pw), dtype=patches[0].image.dtype)
    label = np.zeros((rows * ph, cols * pw), dtype=patches[0].label.dtype)
    for p in patches:
        image[:, :, p.row * ph:(p.row + 1) * ph, p.col * pw:(p.col + 1) * pw] = p.image.data
        label[p.row * ph:(p.row + 1) * ph, p.col * pw:(p.col + 1) * pw] = p.label
    return Tensor(image), label


def hflip(patch: LabeledPatch) -> LabeledPatch:
    """Mirror image and label along the width axis."""
    return LabeledPatch(
        image=Tensor(patch.image.data[:, :, :, ::-1].copy()),
        label=patch.label[:, ::-1].copy(),
        source=patch.source, row=patch.row, col=patch.col,
    )


def stack(patches: Sequence[LabeledPatch], dtype=None) -> Tuple[Tensor, np.ndarray]:
    """Batch patches into an (N, 3, H, W) tensor and (N, H, W) labels."""
    images = np.concatenate([p.image.data for p in patches], axis=0)
    if dtype is not None:
        images = images.astype(dtype, copy=False)
    return Tensor(images), np.stack([p.label for p in patches])

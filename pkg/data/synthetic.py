"""Synthetic aerial-style tiles: textured ground with rectangular roofs."""
from typing import List

import numpy as np

import config
from core.errors import ValidationError
from core.log import get_logger
from data.patches import LabeledPatch
from engine.tensor import Tensor

logger = get_logger("DATA")

MIN_BUILDINGS, MAX_BUILDINGS = 1, 6
MIN_FRACTION, MAX_FRACTION = 0.05, 0.40
MAX_ATTEMPTS = 100

GROUND = np.array([0.30, 0.36, 0.24])
ROOFS = np.array([
    [0.78, 0.76, 0.72],
    [0.80, 0.48, 0.40],
    [0.66, 0.68, 0.76],
    [0.88, 0.86, 0.60],
])


def _ground(rng: np.random.Generator, size: int) -> np.ndarray:
    coarse = rng.normal(0.0, 0.05, size=(3, size // 4, size // 4))
    texture = np.repeat(np.repeat(coarse, 4, axis=1), 4, axis=2)
    fine = rng.normal(0.0, 0.02, size=(3, size, size))
    return GROUND[:, None, None] + texture + fine


def _rectangles(rng: np.random.Generator, size: int):
    lo, hi = max(3, size // 8), max(4, size // 3)
    count = int(rng.integers(MIN_BUILDINGS, MAX_BUILDINGS + 1))
    rects = []
    for _ in range(count):
        h, w = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        top = int(rng.integers(0, size - h + 1))
        left = int(rng.integers(0, size - w + 1))
        rects.append((top, left, h, w))
    return rects


def _mask(rects, size: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=np.uint8)
    for top, left, h, w in rects:
        mask[top:top + h, left:left + w] = 1
    return mask


def _sample(rng: np.random.Generator, size: int):
    image = _ground(rng, size)
    for _ in range(MAX_ATTEMPTS):
        rects = _rectangles(rng, size)
        mask = _mask(rects, size)
        if MIN_FRACTION <= mask.mean() <= MAX_FRACTION:
            break
    else:
        side = size // 3
        rects = [((size - side) // 2, (size - side) // 2, side, side)]
        mask = _mask(rects, size)
    for top, left, h, w in rects:
        roof = ROOFS[int(rng.integers(len(ROOFS)))] + rng.uniform(-0.04, 0.04, size=3)
        image[:, top:top + h, left:left + w] = roof[:, None, None] + rng.normal(0.0, 0.015, size=(3, h, w))
    return np.clip(image, 0.0, 1.0), mask


def gen_synthetic(count: int = config.SYNTHETIC_COUNT, size: int = config.SYNTHETIC_SIZE,
                  seed: int = 0, dtype="float32") -> List[LabeledPatch]:
    """`count` tiles of size x size, each with 5-40% building pixels."""
    if size < 4 or size % 4:
        raise ValidationError(f"synthetic tile size must be a positive multiple of 4, got {size}")
    if count < 1:
        raise ValidationError(f"count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    patches = []
    for index in range(count):
        image, mask = _sample(rng, size)
        patches.append(LabeledPatch(
            image=Tensor(image[np.newaxis].astype(dtype)),
            label=mask,
            source=f"synthetic{index:04d}",
        ))
    fraction = np.mean([p.label.mean() for p in patches])
    logger.info(f"Generated {count} synthetic {size}x{size} tiles (seed {seed}, "
                f"{fraction:.1%} building pixels)")
    return patches

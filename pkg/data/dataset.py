"""Dataset directories: `images/*.ppm`, `labels/*.pgm` and `manifest.csv`."""
from pathlib import Path
from typing import List, Optional

import config
from core.errors import ValidationError
from core.log import get_logger
from data.manifest import DatasetManifest, apply_assignments, read_assignments, split, to_csv
from data.patches import LabeledPatch, cut_patches
from data.pnm import load_image, load_mask, save_image, save_mask

logger = get_logger("DATA")

IMAGES = "images"
LABELS = "labels"
MANIFEST = "manifest.csv"


def write_dataset(out_dir, manifest: DatasetManifest) -> Path:
    """One image/label file pair per patch, named by patch id."""
    out_dir = Path(out_dir)
    for patch in manifest.patches:
        save_image(out_dir / IMAGES / f"{patch.patch_id}.ppm", patch.image)
        save_mask(out_dir / LABELS / f"{patch.patch_id}.pgm", patch.label)
    path = out_dir / MANIFEST
    try:
        path.write_text(to_csv(manifest))
    except OSError as e:
        raise OSError(f"could not write {path}: {e}") from e
    logger.info(f"Wrote {len(manifest)} patches to {out_dir}")
    return path


def _sources(data_dir: Path) -> List[Path]:
    images = data_dir / IMAGES
    if not images.is_dir():
        raise FileNotFoundError(f"dataset directory {data_dir} has no {IMAGES}/ folder")
    found = sorted(images.glob("*.ppm"))
    if not found:
        raise ValidationError(f"no .ppm images under {images}")
    return found


def load_patches(data_dir, patch_size: Optional[int] = None, dtype="float32") -> List[LabeledPatch]:
    """Load every image with its label, cut to `patch_size` when given.

    Files written by `write_dataset` are already patches and load back
    under their original patch ids.
    """
    data_dir = Path(data_dir)
    patches = []
    for image_path in _sources(data_dir):
        label_path = data_dir / LABELS / f"{image_path.stem}.pgm"
        if not label_path.is_file():
            raise ValidationError(f"{image_path} has no label file {label_path}")
        image = load_image(image_path, dtype)
        label = load_mask(label_path)
        if label.shape != image.shape[2:]:
            raise ValidationError(f"{label_path}: label {label.shape} does not match image "
                                  f"{image.shape[2:]}")
        if patch_size is None or patch_size == label.shape[0] == label.shape[1]:
            source, row, col = _parse_patch_id(image_path.stem)
            patches.append(LabeledPatch(image=image, label=label, source=source, row=row, col=col))
        else:
            patches.extend(cut_patches(image, label, patch_size, source=image_path.stem))
    return patches


def _parse_patch_id(stem: str):
    parts = stem.rsplit("_", 2)
    if len(parts) == 3 and parts[1].isdigit() and parts[2].isdigit():
        return parts[0], int(parts[1]), int(parts[2])
    return stem, 0, 0


def load_dataset(data_dir, patch_size: Optional[int] = None, fraction: float = config.TRAIN_FRACTION,
                 seed: int = 0, dtype="float32") -> DatasetManifest:
    """Patches with split assignments from `manifest.csv`, or a fresh seeded split."""
    data_dir = Path(data_dir)
    manifest = DatasetManifest(load_patches(data_dir, patch_size, dtype), seed=seed)
    manifest_path = data_dir / MANIFEST
    if manifest_path.is_file():
        manifest = apply_assignments(manifest, read_assignments(manifest_path.read_text(), str(manifest_path)))
        if not all(manifest.splits):
            manifest = split(manifest, fraction, seed)
    else:
        manifest = split(manifest, fraction, seed)
    logger.info(f"Loaded {len(manifest)} patches from {data_dir} "
                f"({len(manifest.train)} train / {len(manifest.val)} val)")
    return manifest

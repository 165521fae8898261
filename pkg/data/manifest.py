"""Train/validation split assignment and its CSV manifest."""
import csv
import io
from dataclasses import dataclass, field, replace
from typing import Dict, List

import numpy as np

import config
from core.errors import ValidationError
from data.patches import LabeledPatch

MANIFEST_HEADER = ["patch_id", "source", "row", "col", "split"]
TRAIN = "train"
VAL = "val"


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered patches plus one split tag per patch ("" before `split` runs)."""

    patches: List[LabeledPatch]
    splits: List[str] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if not self.splits:
            object.__setattr__(self, "splits", [""] * len(self.patches))
        if len(self.splits) != len(self.patches):
            raise ValidationError(f"{len(self.splits)} split tags for {len(self.patches)} patches")

    def subset(self, tag: str) -> List[LabeledPatch]:
        return [p for p, s in zip(self.patches, self.splits) if s == tag]

    @property
    def train(self) -> List[LabeledPatch]:
        return self.subset(TRAIN)

    @property
    def val(self) -> List[LabeledPatch]:
        return self.subset(VAL)

    def __len__(self):
        return len(self.patches)


def split(manifest: DatasetManifest, fraction: float = config.TRAIN_FRACTION, seed: int = 0) -> DatasetManifest:
    """Seeded shuffle, then the first round(fraction * n) patches train.

    Both sides keep at least one patch.
    """
    n = len(manifest.patches)
    if n < 2:
        raise ValidationError(f"a train/validation split needs at least 2 patches, got {n}")
    if not 0 < fraction < 1:
        raise ValidationError(f"split fraction must be in (0, 1), got {fraction}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    splits = [VAL] * n
    for index in order[:n_train]:
        splits[int(index)] = TRAIN
    return replace(manifest, splits=splits, seed=seed)


def to_csv(manifest: DatasetManifest) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    for patch, tag in zip(manifest.patches, manifest.splits):
        writer.writerow([patch.patch_id, patch.source, patch.row, patch.col, tag])
    return buffer.getvalue()


def read_assignments(text: str, path: str = "manifest.csv") -> Dict[str, str]:
    """patch_id -> split tag from a manifest CSV."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != MANIFEST_HEADER:
        raise ValidationError(f"{path}: header must be {','.join(MANIFEST_HEADER)}, "
                              f"got {','.join(reader.fieldnames or [])}")
    assignments = {}
    for line, row in enumerate(reader, start=2):
        if row["split"] not in (TRAIN, VAL, ""):
            raise ValidationError(f"{path}:{line}: unknown split '{row['split']}'")
        assignments[row["patch_id"]] = row["split"]
    return assignments


def apply_assignments(manifest: DatasetManifest, assignments: Dict[str, str]) -> DatasetManifest:
    missing = [p.patch_id for p in manifest.patches if p.patch_id not in assignments]
    if missing:
        raise ValidationError(f"manifest has no split for {len(missing)} patches (first: {missing[0]})")
    return replace(manifest, splits=[assignments[p.patch_id] for p in manifest.patches])

"""The epoch loop: seeded shuffling, flip augmentation, SGD and per-epoch checkpoints."""
import csv
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from core.errors import NumericalError, ValidationError
from core.log import get_logger
from data.manifest import DatasetManifest
from data.patches import LabeledPatch, hflip, stack
from engine.tensor import DTYPES, Tensor
from metrics.confusion import ConfusionMatrix, acc, evaluate, miou
from network.graph import LayerGraph
from training.checkpoint import checkpoint_save
from training.init import initialize
from training.loss import cross_entropy_loss, one_hot
from training.optimizer import OptimizerState, sgd_step
from training.settings import TrainingConfig

logger = get_logger("TRAINER")

LOG_HEADER = ["epoch", "loss", "miou", "acc", "seconds"]


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    loss: float
    miou: Optional[float]
    acc: Optional[float]
    seconds: float
    steps: int

    def cells(self, record_wall_time: bool) -> List[str]:
        def metric(value):
            return "" if value is None else f"{value:.6f}"

        seconds = self.seconds if record_wall_time else 0.0
        return [str(self.epoch), f"{self.loss:.6f}", metric(self.miou), metric(self.acc), f"{seconds:.3f}"]


@dataclass
class RandomStreams:
    """Independent generators for init, shuffling and augmentation, all from one seed."""

    init: np.random.Generator
    shuffle: np.random.Generator
    augment: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RandomStreams":
        init, shuffle, augment = np.random.SeedSequence(seed).spawn(3)
        return cls(np.random.default_rng(init), np.random.default_rng(shuffle), np.random.default_rng(augment))


def predict_labels(graph: LayerGraph, image: Tensor) -> np.ndarray:
    """Per-pixel argmax labels; (H, W) for a single image, (N, H, W) for a batch."""
    probs = graph.forward(image)
    labels = np.argmax(probs.data, axis=1).astype(np.uint8)
    return labels[0] if labels.shape[0] == 1 else labels


def validate(graph: LayerGraph, patches: Sequence[LabeledPatch]) -> ConfusionMatrix:
    dtype = next(iter(graph.params.values())).dtype
    return evaluate(lambda p: predict_labels(graph, p.image.astype(dtype)), patches, graph.n_classes)


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


class _Log:
    """Append-only CSV writer, flushed after every row."""

    def __init__(self, path: Optional[Path], record_wall_time: bool):
        self.path = path
        self.record_wall_time = record_wall_time
        if path is not None:
            self._write("w", LOG_HEADER)

    def _write(self, mode: str, cells: List[str]) -> None:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, mode, newline="") as f:
                csv.writer(f, lineterminator="\n").writerow(cells)
        except OSError as e:
            raise OSError(f"could not write training log {self.path}: {e}") from e

    def append(self, entry: EpochLog) -> None:
        if self.path is not None:
            self._write("a", entry.cells(self.record_wall_time))


def train(graph: LayerGraph, dataset: DatasetManifest, config: TrainingConfig,
          log_path=None, metadata: Optional[Dict] = None,
          on_epoch: Optional[Callable[[EpochLog], None]] = None) -> List[EpochLog]:
    """Train on the manifest's train split, validating on its val split after every epoch.

    Parameters already installed on `graph` are trained as they are;
    otherwise they are He-initialized from the init stream.
    """
    train_set, val_set = dataset.train, dataset.val
    if not train_set:
        raise ValidationError("the dataset has no training patches")
    graph.check_input(train_set[0].image.shape)
    for patch in train_set + val_set:
        if patch.size != train_set[0].size:
            raise ValidationError(f"{patch.patch_id} is {patch.size}, expected {train_set[0].size}")

    dtype = DTYPES[config.precision]
    streams = RandomStreams.from_seed(config.seed)
    if graph.params is None:
        initialize(graph, streams.init, config.precision)
    else:
        graph.set_params({k: np.array(v, dtype=dtype) for k, v in graph.params.items()})
    state = OptimizerState(graph.params)
    log = _Log(Path(log_path) if log_path else None, config.record_wall_time)
    base_metadata = dict(metadata or {})
    if graph.spec is not None:
        base_metadata.setdefault("architecture", graph.spec.to_dict())
    base_metadata.update(seed=config.seed, in_channels=graph.in_channels, n_classes=graph.n_classes,
                         precision=config.precision)

    logger.info(f"Training {graph} on {len(train_set)} patches "
                f"({len(val_set)} validation), {config.epochs} epochs, batch {config.batch_size}")
    history: List[EpochLog] = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = streams.shuffle.permutation(len(train_set))
        weighted_loss, seen, steps = 0.0, 0, 0
        for batch in _batches(order, config.batch_size):
            patches = []
            for index in batch:
                patch = train_set[int(index)]
                if streams.augment.random() < config.flip_probability:
                    patch = hflip(patch)
                patches.append(patch)
            images, labels = stack(patches, dtype)
            step += 1
            probs = graph.forward(images)
            loss, grad = cross_entropy_loss(probs, one_hot(labels, graph.n_classes, dtype))
            if not np.isfinite(loss):
                raise NumericalError(f"loss became {loss}", epoch=epoch, step=step)
            grads = graph.backward(grad)
            sgd_step(graph.params, grads, state, config)
            weighted_loss += loss * len(batch)
            seen += len(batch)
            steps += 1

        val_miou = val_acc = None
        if val_set:
            cm = validate(graph, val_set)
            val_miou, val_acc = miou(cm), acc(cm)
        seconds = time.perf_counter() - started
        entry = EpochLog(epoch, weighted_loss / seen, val_miou, val_acc, seconds, steps)
        history.append(entry)
        log.append(entry)
        checkpoint_save(config.checkpoint_path, graph.params, state.velocity,
                        dict(base_metadata, epoch=epoch))
        shown = "n/a" if val_miou is None else f"{val_miou:.4f}"
        shown_acc = "n/a" if val_acc is None else f"{val_acc:.4f}"
        logger.info(f"Epoch {epoch}/{config.epochs}: loss {entry.loss:.4f}, mIOU {shown}, "
                    f"ACC {shown_acc}, {steps} steps ({seconds:.1f}s)")
        if on_epoch is not None:
            on_epoch(entry)
    return history

"""Training hyperparameters."""
from dataclasses import asdict, dataclass, fields
from typing import Dict

import config
from core.errors import ConfigError


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = config.LEARNING_RATE
    momentum: float = config.MOMENTUM
    weight_decay: float = config.WEIGHT_DECAY
    batch_size: int = config.BATCH_SIZE
    epochs: int = config.EPOCHS
    seed: int = 0
    checkpoint_path: str = "checkpoint.mnck"
    precision: str = config.MICRONET_PRECISION
    flip_probability: float = config.FLIP_PROBABILITY
    record_wall_time: bool = False

    def __post_init__(self):
        for name in ("learning_rate", "momentum", "weight_decay", "flip_probability"):
            if getattr(self, name) < 0:
                raise ConfigError(f"training.{name} must be non-negative, got {getattr(self, name)}")
        if self.flip_probability > 1:
            raise ConfigError("training.flip_probability must be at most 1")
        if self.batch_size < 1:
            raise ConfigError(f"training.batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"training.epochs must be >= 0, got {self.epochs}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("training.seed must fit in an unsigned 64-bit integer")
        if self.precision not in ("float32", "float64"):
            raise ConfigError(f"training.precision must be float32 or float64, got {self.precision}")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown training keys: {', '.join(unknown)}")
        return cls(**data)

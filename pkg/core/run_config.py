"""Run configuration: architecture + training + data, resolved defaults < file < flags."""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

import config
from core.errors import ConfigError
from network.architecture import ArchitectureSpec, preset
from training.settings import TrainingConfig

SECTIONS = ("name", "architecture", "training", "data")


@dataclass(frozen=True)
class DataConfig:
    """Where patches come from. No `data_dir` means a generated synthetic set."""

    data_dir: Optional[str] = None
    patch_size: Optional[int] = None
    train_fraction: float = config.TRAIN_FRACTION
    synthetic_count: int = config.SYNTHETIC_COUNT
    synthetic_size: int = config.SYNTHETIC_SIZE

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"data.train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.patch_size is not None and self.patch_size < 1:
            raise ConfigError(f"data.patch_size must be positive, got {self.patch_size}")
        if self.synthetic_count < 2:
            raise ConfigError("data.synthetic_count must be at least 2")
        if self.synthetic_size < 4 or self.synthetic_size % 4:
            raise ConfigError(f"data.synthetic_size must be a positive multiple of 4, got {self.synthetic_size}")

    @classmethod
    def from_dict(cls, data: Dict) -> "DataConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown data keys: {', '.join(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    architecture: ArchitectureSpec = field(default_factory=lambda: preset("micro"))
    training: TrainingConfig = field(default_factory=TrainingConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "architecture": self.architecture.to_dict(),
            "training": self.training.to_dict(),
            "data": asdict(self.data),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown run config sections: {', '.join(unknown)}")
        base = cls()
        architecture = data.get("architecture")
        if isinstance(architecture, str):
            architecture = preset(architecture)
        elif isinstance(architecture, dict):
            architecture = ArchitectureSpec.from_dict(architecture)
        elif architecture is None:
            architecture = base.architecture
        else:
            raise ConfigError("architecture must be a preset name or an object of fields")
        try:
            return cls(
                name=str(data.get("name", base.name)),
                architecture=architecture,
                training=TrainingConfig.from_dict(data.get("training", {})),
                data=DataConfig.from_dict(data.get("data", {})),
            )
        except TypeError as e:
            raise ConfigError(f"malformed run config: {e}") from e


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read run config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return RunConfig.from_dict(data)


def apply_overrides(run: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """Apply `section.field` overrides (flags) on top of a resolved config; None values are skipped."""
    sections: Dict[str, Dict[str, Any]] = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("name", "architecture"):
            run = replace(run, **{key: value})
            continue
        section, _, name = key.partition(".")
        if section not in ("training", "data") or not name:
            raise ConfigError(f"cannot override '{key}'")
        sections.setdefault(section, {})[name] = value
    if "training" in sections:
        run = replace(run, training=TrainingConfig.from_dict({**run.training.to_dict(), **sections["training"]}))
    if "data" in sections:
        run = replace(run, data=DataConfig.from_dict({**asdict(run.data), **sections["data"]}))
    return run


def write_resolved(run: RunConfig, out_dir) -> Path:
    """Snapshot the fully resolved config; written before any other run artifact."""
    path = Path(out_dir) / "resolved_config.json"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(run.to_json())
    except OSError as e:
        raise OSError(f"could not write {path}: {e}") from e
    return path

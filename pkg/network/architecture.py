"""Architecture family: one parameterization generates U-Net, BM1-3 and Micro-Net."""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Tuple

import config
from core.errors import ConfigError, GraphConstructionError
from core.log import get_logger
from network.fire import FireModuleSpec, build_fire_module
from network.graph import LayerGraph
from network.layers import Classifier, ConvBlock, Deconv, Junction, Layer, MaxPool, SkipSource, Upsample

logger = get_logger("GRAPH")

VARIANTS = ("UNET", "BM1", "BM2", "BM3", "MICRO", "custom")


@dataclass(frozen=True)
class ArchitectureSpec:
    """Full family parameterization.

    `encoder_rate_schedule` holds one rate list per encoder sequence (one
    sequence per pyramid level, `num_pools + 1` of them). Decoder rates are
    the encoder's, reversed.
    """

    variant: str = "custom"
    base_e: int = config.BASE_E
    freq: int = config.FREQ
    sr_text: float = config.SQUEEZE_RATIO_TEXT
    sr_effective: float = config.SQUEEZE_RATIO
    p3x3: float = config.P3X3
    num_pools: int = 2
    modules_per_encoder_sequence: int = 3
    encoder_rate_schedule: Tuple[Tuple[int, ...], ...] = ((1, 1, 1), (1, 1, 1), (1, 1, 1))
    decoder_modules_per_sequence: int = 3
    skip_mode: str = "add"
    block: str = "fire"
    upsample: str = "deconv"
    decoder_at_bottleneck: bool = True
    e_rule: str = "level"

    def __post_init__(self):
        object.__setattr__(self, "encoder_rate_schedule",
                           tuple(tuple(int(r) for r in rates) for rates in self.encoder_rate_schedule))
        self.validate()

    def validate(self) -> None:
        def bad(message):
            raise ConfigError(f"architecture '{self.variant}': {message}")

        if self.variant not in VARIANTS:
            bad(f"variant must be one of {', '.join(VARIANTS)}")
        for name in ("base_e", "freq", "num_pools", "modules_per_encoder_sequence",
                     "decoder_modules_per_sequence"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                bad(f"{name} must be an integer, got {value!r}")
        if self.num_pools < 0:
            bad("num_pools must be >= 0")
        if len(self.encoder_rate_schedule) != self.num_pools + 1:
            bad(f"needs {self.num_pools + 1} encoder rate lists, got {len(self.encoder_rate_schedule)}")
        for k, rates in enumerate(self.encoder_rate_schedule):
            if len(rates) != self.modules_per_encoder_sequence:
                bad(f"sequence {k + 1} has {len(rates)} rates, expected "
                    f"{self.modules_per_encoder_sequence} modules")
            if any(r < 1 for r in rates):
                bad(f"sequence {k + 1} has a rate below 1: {rates}")
        if self.modules_per_encoder_sequence < 1 or self.decoder_modules_per_sequence < 1:
            bad("every sequence needs at least one module")
        if self.base_e < 1 or self.freq < 1:
            bad("base_e and freq must be positive")
        if not 0 < self.sr_effective <= 1:
            bad("sr_effective must be in (0, 1]")
        if not 0 <= self.p3x3 <= 1:
            bad("p3x3 must be in [0, 1]")
        for name, allowed in (("skip_mode", ("add", "concat")), ("block", ("fire", "conv")),
                              ("upsample", ("deconv", "fire")), ("e_rule", ("level", "index"))):
            if getattr(self, name) not in allowed:
                bad(f"{name} must be one of {allowed}")

    # -- derived per-level settings ---------------------------------------

    def encoder_e(self) -> List[List[int]]:
        """Expand-filter count of every encoder module, grouped by level."""
        out, index = [], 0
        for level, rates in enumerate(self.encoder_rate_schedule):
            row = []
            for _ in rates:
                if self.e_rule == "index":
                    row.append(self.base_e * 2 ** (index // self.freq))
                else:
                    row.append(self.base_e * 2 ** level)
                index += 1
            out.append(row)
        return out

    def decoder_levels(self) -> List[int]:
        top = self.num_pools if self.decoder_at_bottleneck else self.num_pools - 1
        return list(range(top, -1, -1))

    def decoder_rates(self, level: int) -> List[int]:
        rates = list(reversed(self.encoder_rate_schedule[level]))[:self.decoder_modules_per_sequence]
        return rates + [1] * (self.decoder_modules_per_sequence - len(rates))

    def decoder_e(self, level: int) -> List[int]:
        es = list(reversed(self.encoder_e()[level]))[:self.decoder_modules_per_sequence]
        return es + [es[-1]] * (self.decoder_modules_per_sequence - len(es))

    # -- (de)serialization --------------------------------------------------

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["encoder_rate_schedule"] = [list(r) for r in self.encoder_rate_schedule]
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ArchitectureSpec":
        if not isinstance(data, dict):
            raise ConfigError(f"architecture must be an object of fields, got {type(data).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown architecture keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"architecture '{data.get('variant', 'custom')}': malformed field ({e})") from e


def with_encoder_prefix(spec: ArchitectureSpec, count: int, variant: str = "custom") -> ArchitectureSpec:
    """Insert `count` standard (rate-1) fire modules before every encoder sequence."""
    schedule = tuple((1,) * count + tuple(rates) for rates in spec.encoder_rate_schedule)
    return replace(spec, variant=variant, encoder_rate_schedule=schedule,
                   modules_per_encoder_sequence=spec.modules_per_encoder_sequence + count)


def _unet() -> ArchitectureSpec:
    return ArchitectureSpec(variant="UNET", block="conv", num_pools=4, modules_per_encoder_sequence=2,
                            encoder_rate_schedule=((1, 1),) * 5, decoder_modules_per_sequence=2,
                            skip_mode="concat", decoder_at_bottleneck=False)


def _bm1() -> ArchitectureSpec:
    return ArchitectureSpec(variant="BM1", num_pools=4, modules_per_encoder_sequence=2,
                            encoder_rate_schedule=((1, 1),) * 5, decoder_modules_per_sequence=2,
                            skip_mode="concat", decoder_at_bottleneck=False, e_rule="index")


def _bm2() -> ArchitectureSpec:
    return ArchitectureSpec(variant="BM2")


def _bm3() -> ArchitectureSpec:
    return ArchitectureSpec(variant="BM3", encoder_rate_schedule=((1, 2, 3),) * 3)


def _micro() -> ArchitectureSpec:
    return with_encoder_prefix(_bm3(), 1, variant="MICRO")


PRESETS = {
    "unet": _unet,
    "bm1": _bm1,
    "bm2": _bm2,
    "bm3": _bm3,
    "micro": _micro,
    "bm3-mixed": lambda: replace(_bm3(), variant="custom",
                                 encoder_rate_schedule=((1, 2, 5), (1, 2, 3), (1, 1, 2))),
    "micro-deep": lambda: with_encoder_prefix(_bm3(), 2),
}


def preset(name: str) -> ArchitectureSpec:
    try:
        return PRESETS[name.lower()]()
    except KeyError:
        raise ConfigError(f"unknown architecture '{name}'; choose from: {', '.join(PRESETS)}") from None


def load_architecture(path) -> ArchitectureSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from e
    return ArchitectureSpec.from_dict(data)


def save_architecture(spec: ArchitectureSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def resolve_architecture(name_or_path: str) -> ArchitectureSpec:
    """A preset name, or a path to an architecture JSON file."""
    if name_or_path.lower() in PRESETS:
        return preset(name_or_path)
    if Path(name_or_path).is_file():
        return load_architecture(name_or_path)
    return preset(name_or_path)


@dataclass
class _Builder:
    spec: ArchitectureSpec
    channels: int
    layers: List[Layer] = field(default_factory=list)
    skip_edges: List[Tuple[str, str]] = field(default_factory=list)

    def block(self, name: str, e: int, rate: int) -> None:
        if self.spec.block == "conv":
            layer = ConvBlock(name, self.channels, e, 3, rate)
        else:
            fire = FireModuleSpec.from_expand(self.channels, e, self.spec.sr_effective, self.spec.p3x3, rate)
            layer = build_fire_module(fire, name)
        self.layers.append(layer)
        self.channels = layer.out_channels


def build_architecture(spec: ArchitectureSpec, in_channels: int = 3, n_classes: int = config.N_CLASSES) -> LayerGraph:
    """Wire the encoder, decoder and bypass edges described by `spec`."""
    b = _Builder(spec, in_channels)
    prefix = "fm" if spec.block == "fire" else "conv"
    skip_channels: Dict[int, int] = {}

    index = 0
    for level, (rates, es) in enumerate(zip(spec.encoder_rate_schedule, spec.encoder_e())):
        for rate, e in zip(rates, es):
            index += 1
            b.block(f"{prefix}{index}", e, rate)
        if level < spec.num_pools:
            b.layers.append(SkipSource(f"skip{level + 1}", b.channels, f"skip{level + 1}"))
            skip_channels[level] = b.channels
            b.layers.append(MaxPool(f"mp{level + 1}", b.channels))

    levels = spec.decoder_levels()
    remaining = len(levels) * spec.decoder_modules_per_sequence
    up = 0
    for level in levels:
        if level < spec.num_pools:
            up += 1
            _up_sample(b, up)
            source = f"skip{level + 1}"
            name = f"{spec.skip_mode}{up}"
            edge = f"{source} -> {name}"
            if spec.skip_mode == "add" and b.channels != skip_channels[level]:
                raise GraphConstructionError(
                    f"add junction needs equal channels, decoder has {b.channels}, "
                    f"encoder has {skip_channels[level]}", edge=edge)
            junction = Junction(name, b.channels, skip_channels[level], source, spec.skip_mode)
            b.layers.append(junction)
            b.channels = junction.out_channels
            b.skip_edges.append((source, name))
        for rate, e in zip(spec.decoder_rates(level), spec.decoder_e(level)):
            b.block(f"d{prefix}{remaining}", e, rate)
            remaining -= 1

    b.layers.append(Classifier("conv", b.channels, n_classes))
    graph = LayerGraph(b.layers, in_channels, n_classes, spec.num_pools, b.skip_edges, spec=spec)
    logger.debug(f"Built {graph}")
    return graph


def _up_sample(b: _Builder, index: int) -> None:
    if b.channels % 2:
        raise GraphConstructionError(f"cannot halve {b.channels} channels when up-sampling",
                                     edge=f"up{index}")
    half = b.channels // 2
    if b.spec.upsample == "deconv":
        layer = Deconv(f"dec{index}", b.channels, half)
        b.layers.append(layer)
        b.channels = half
    else:
        b.layers.append(Upsample(f"up{index}", b.channels))
        b.block(f"ufm{index}", half, 1)

"""Fire modules: filter counts derived from e, SR and p3x3."""
from dataclasses import dataclass

from core.errors import ParameterError
from network.layers import FireModule


@dataclass(frozen=True)
class FireModuleSpec:
    in_channels: int
    s1x1: int
    e1x1: int
    e3x3: int
    rate: int = 1

    def __post_init__(self):
        for field in ("in_channels", "s1x1", "e1x1", "e3x3", "rate"):
            value = getattr(self, field)
            if value < 1:
                raise ParameterError(f"fire module {field} must be positive, got {value}")

    @classmethod
    def from_expand(cls, in_channels: int, e: int, squeeze_ratio: float, p3x3: float,
                    rate: int = 1) -> "FireModuleSpec":
        """Split e expand filters by p3x3 and size the squeeze layer by SR."""
        e3x3 = int(round(p3x3 * e))
        s1x1 = int(round(squeeze_ratio * e))
        return cls(in_channels=in_channels, s1x1=s1x1, e1x1=e - e3x3, e3x3=e3x3, rate=rate)

    @property
    def out_channels(self) -> int:
        return self.e1x1 + self.e3x3

    @property
    def param_count(self) -> int:
        s = self.s1x1
        return self.in_channels * s + s * self.e1x1 + s * self.e3x3 * 9


def build_fire_module(spec: FireModuleSpec, name: str = "fm") -> FireModule:
    """Squeeze/expand layer stack for one fire module."""
    return FireModule(name, spec.in_channels, spec.s1x1, spec.e1x1, spec.e3x3, spec.rate)

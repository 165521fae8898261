"""Dense 4-D tensors in (batch, channels, height, width) layout."""
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from core.errors import DimensionError, ParameterError

AXES = ("batch", "channels", "height", "width")
DTYPES = {"float32": np.float32, "float64": np.float64}


class Tensor:
    """A 4-D array of real scalars.

    The precision is a property of the tensor itself: float64 for gradient
    checks, float32 for training. Tensors produced by ops are read-only; a
    Tensor wrapping a caller's array (e.g. a parameter that the optimizer
    updates in place) leaves that array writable.
    """

    __slots__ = ("data",)

    def __init__(self, data, dtype: Union[str, type, None] = None):
        if isinstance(dtype, str):
            dtype = DTYPES[dtype]
        array = np.asarray(data, dtype=dtype)
        if array.dtype not in (np.float32, np.float64):
            array = array.astype(np.float64)
        if array.ndim != 4:
            raise DimensionError(f"Tensor must be 4-D, got shape {array.shape}", axis="ndim")
        self.data = array

    @classmethod
    def frozen(cls, array: np.ndarray) -> "Tensor":
        """Wrap an op result and mark it immutable."""
        tensor = cls(array)
        tensor.data.setflags(write=False)
        return tensor

    @classmethod
    def zeros(cls, shape: Tuple[int, int, int, int], dtype="float64") -> "Tensor":
        return cls(np.zeros(shape, dtype=DTYPES.get(dtype, dtype)))

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(DTYPES.get(dtype, dtype)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype})"


def check_axis(name: str, expected: int, got: int, what: str = "") -> None:
    """Raise a DimensionError naming the axis when two sizes differ."""
    if expected != got:
        prefix = f"{what}: " if what else ""
        raise DimensionError(f"{prefix}expected {expected}, got {got}", axis=name)


@dataclass(frozen=True)
class ConvParams:
    """Kernel plus geometry of a bias-free 2-D convolution."""

    kernel: Tensor
    dilation_rate: int = 1
    stride: int = 1
    padding_mode: str = "SAME"

    def __post_init__(self):
        if self.dilation_rate < 1:
            raise ParameterError(f"dilation rate must be >= 1, got {self.dilation_rate}")
        if self.stride < 1:
            raise ParameterError(f"stride must be >= 1, got {self.stride}")
        if self.padding_mode not in ("SAME", "VALID"):
            raise ParameterError(f"padding mode must be SAME or VALID, got {self.padding_mode}")

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def kernel_size(self) -> Tuple[int, int]:
        return self.kernel.shape[2], self.kernel.shape[3]

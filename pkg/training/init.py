"""He (Kaiming) normal initialization."""
import numpy as np

from core.errors import ParameterError
from engine.tensor import DTYPES, Tensor


def he_init(shape, fan_in: int, rng: np.random.Generator, dtype="float64") -> Tensor:
    """i.i.d. N(0, 2 / fan_in) samples; draws are float64 then cast."""
    if fan_in <= 0:
        raise ParameterError(f"fan_in must be positive, got {fan_in}")
    values = rng.standard_normal(tuple(shape)) * np.sqrt(2.0 / fan_in)
    return Tensor(values.astype(DTYPES.get(dtype, dtype)))


def initialize(graph, rng: np.random.Generator, dtype="float32") -> None:
    """Draw every kernel of `graph` in parameter order."""
    params = {}
    for spec in graph.param_specs():
        params[spec.name] = np.array(he_init(spec.shape, spec.fan_in, rng, dtype).data)
    graph.set_params(params)

"""SGD with classical momentum and coupled weight decay."""
from typing import Dict

import numpy as np

from core.errors import DimensionError


class OptimizerState:
    """One velocity buffer per parameter tensor, zero at start."""

    def __init__(self, params: Dict[str, np.ndarray]):
        self.velocity: Dict[str, np.ndarray] = {
            name: np.zeros_like(value) for name, value in params.items()
        }

    def check(self, params: Dict[str, np.ndarray]) -> None:
        for name, value in params.items():
            if name not in self.velocity or self.velocity[name].shape != value.shape:
                raise DimensionError(f"velocity for {name} does not mirror the parameter", axis=name)


def sgd_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
             state: OptimizerState, config) -> None:
    """In place, per tensor: g' = g + wd*w; v = m*v - lr*g'; w = w + v."""
    state.check(params)
    lr, momentum, wd = config.learning_rate, config.momentum, config.weight_decay
    for name, w in params.items():
        g = grads[name]
        if g.shape != w.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, parameter {w.shape}",
                                 axis=name)
        v = state.velocity[name]
        step = g + wd * w if wd else g
        v *= momentum
        v -= lr * step
        w += v

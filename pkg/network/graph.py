"""Layer graphs: an ordered encoder-decoder node list with bypass edges."""
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.errors import DimensionError, ParameterError
from core.log import get_logger
from engine.tensor import Tensor
from network.layers import Classifier, Layer, ParamSpec

logger = get_logger("GRAPH")


class LayerGraph:
    """Topologically ordered layers plus the kernels they own.

    Skip edges are (source node, junction node) pairs; the source publishes
    its activation when the forward pass reaches it and the junction
    consumes it, so running the node list in order is a valid schedule.
    """

    def __init__(self, layers: List[Layer], in_channels: int, n_classes: int, num_pools: int,
                 skip_edges: List[Tuple[str, str]], spec=None):
        if not layers or not isinstance(layers[-1], Classifier):
            raise ParameterError("a layer graph must end with the classifier")
        self.layers = layers
        self.in_channels = in_channels
        self.n_classes = n_classes
        self.num_pools = num_pools
        self.skip_edges = skip_edges
        self.spec = spec
        self.params: Optional[Dict[str, np.ndarray]] = None

    # -- parameters ---------------------------------------------------------

    def param_specs(self) -> List[ParamSpec]:
        return [p for layer in self.layers for p in layer.param_specs()]

    def count_params(self) -> int:
        return sum(p.size for p in self.param_specs())

    def set_params(self, params: Dict[str, np.ndarray]) -> None:
        """Install kernels, checking names and shapes against the graph."""
        specs = self.param_specs()
        expected = {p.name: p.shape for p in specs}
        missing = set(expected) - set(params)
        unknown = set(params) - set(expected)
        if missing or unknown:
            raise ParameterError(
                f"parameter names do not match the graph "
                f"(missing: {sorted(missing)[:3]}, unknown: {sorted(unknown)[:3]})"
            )
        for name, shape in expected.items():
            if tuple(params[name].shape) != shape:
                raise DimensionError(f"{name} has shape {params[name].shape}, graph needs {shape}",
                                     axis=name)
        self.params = {p.name: params[p.name] for p in specs}

    def zero_params(self, dtype=np.float64) -> None:
        self.params = {p.name: np.zeros(p.shape, dtype=dtype) for p in self.param_specs()}

    # -- execution ----------------------------------------------------------

    def check_input(self, shape) -> None:
        """Reject inputs the pyramid cannot process, before any computation."""
        if shape[1] != self.in_channels:
            raise DimensionError(f"graph expects {self.in_channels} input channels, got {shape[1]}",
                                 axis="channels")
        factor = 2 ** self.num_pools
        for axis, size in (("height", shape[2]), ("width", shape[3])):
            if size % factor:
                raise DimensionError(
                    f"{axis} {size} is not divisible by 2^{self.num_pools} = {factor}", axis=axis)

    def forward(self, x: Tensor) -> Tensor:
        """Run every node in order; returns per-pixel class probabilities."""
        if self.params is None:
            raise ParameterError("graph parameters are not initialized")
        self.check_input(x.shape)
        skips: Dict[str, Tensor] = {}
        for layer in self.layers:
            x = layer.forward(x, self.params, skips)
        return x

    @property
    def logits(self) -> Tensor:
        """Pre-softmax output of the most recent forward pass."""
        return self.layers[-1].logits

    def backward(self, grad_logits: Tensor) -> Dict[str, np.ndarray]:
        """Gradient of every kernel, given d(loss)/d(logits) of the last forward."""
        grads: Dict[str, np.ndarray] = {}
        skip_grads: Dict[str, Tensor] = {}
        grad = grad_logits
        for layer in reversed(self.layers):
            grad = layer.backward(grad, self.params, grads, skip_grads)
        return {p.name: grads[p.name] for p in self.param_specs()}

    def __repr__(self):
        variant = self.spec.variant if self.spec is not None else "custom"
        return f"LayerGraph({variant}, {len(self.layers)} nodes, {self.count_params():,} params)"


def forward(graph: LayerGraph, x: Tensor) -> Tensor:
    return graph.forward(x)


def backward(graph: LayerGraph, grad_logits: Tensor) -> Dict[str, np.ndarray]:
    return graph.backward(grad_logits)


def count_params(graph: LayerGraph) -> int:
    """Exact number of kernel elements (the family has no biases)."""
    return graph.count_params()

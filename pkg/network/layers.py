"""Graph nodes: each layer runs its forward pass, caches what its backward
pass needs, and reports its parameter tensors."""
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from engine import ops
from engine.tensor import ConvParams, Tensor

Params = Dict[str, np.ndarray]


@dataclass(frozen=True)
class ParamSpec:
    """Shape and He fan-in of one kernel tensor."""

    name: str
    shape: Tuple[int, ...]
    fan_in: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


class Layer:
    """Base node. `scale` is the change in pyramid level (-1 pool, +1 up-sample)."""

    kind = "layer"
    scale = 0
    depth = 0

    def __init__(self, name: str, in_channels: int, out_channels: int):
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels

    def param_specs(self) -> List[ParamSpec]:
        return []

    def forward(self, x: Tensor, params: Params, skips: Dict[str, Tensor]) -> Tensor:
        raise NotImplementedError

    def backward(self, grad: Tensor, params: Params, grads: Params,
                 skip_grads: Dict[str, Tensor]) -> Tensor:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.name}: {self.in_channels}->{self.out_channels})"


def _conv(params: Params, key: str, rate: int = 1) -> ConvParams:
    return ConvParams(Tensor(params[key]), dilation_rate=rate)


class FireModule(Layer):
    """Squeeze 1x1 -> (expand 1x1 | dilated expand 3x3) -> channel concat, all ReLU."""

    kind = "fire"
    depth = 2

    def __init__(self, name: str, in_channels: int, s1x1: int, e1x1: int, e3x3: int, rate: int = 1):
        super().__init__(name, in_channels, e1x1 + e3x3)
        self.s1x1, self.e1x1, self.e3x3, self.rate = s1x1, e1x1, e3x3, rate
        self._cache = None

    def param_specs(self) -> List[ParamSpec]:
        s = self.s1x1
        return [
            ParamSpec(f"{self.name}.squeeze", (s, self.in_channels, 1, 1), self.in_channels),
            ParamSpec(f"{self.name}.expand1x1", (self.e1x1, s, 1, 1), s),
            ParamSpec(f"{self.name}.expand3x3", (self.e3x3, s, 3, 3), 9 * s),
        ]

    def forward(self, x, params, skips):
        squeeze = _conv(params, f"{self.name}.squeeze")
        expand1 = _conv(params, f"{self.name}.expand1x1")
        expand3 = _conv(params, f"{self.name}.expand3x3", self.rate)
        s_pre = ops.conv2d(x, squeeze)
        s_act = ops.relu(s_pre)
        a_pre = ops.conv2d(s_act, expand1)
        b_pre = ops.conv2d(s_act, expand3)
        self._cache = (x, s_pre, s_act, a_pre, b_pre)
        return ops.concat_channels(ops.relu(a_pre), ops.relu(b_pre))

    def backward(self, grad, params, grads, skip_grads):
        x, s_pre, s_act, a_pre, b_pre = self._cache
        squeeze = _conv(params, f"{self.name}.squeeze")
        expand1 = _conv(params, f"{self.name}.expand1x1")
        expand3 = _conv(params, f"{self.name}.expand3x3", self.rate)
        ga, gb = ops.concat_channels_backward(grad, self.e1x1)
        gs_a, grads[f"{self.name}.expand1x1"] = _unwrap(
            ops.conv2d_backward(s_act, expand1, ops.relu_backward(a_pre, ga)))
        gs_b, grads[f"{self.name}.expand3x3"] = _unwrap(
            ops.conv2d_backward(s_act, expand3, ops.relu_backward(b_pre, gb)))
        gs = ops.add_elementwise(Tensor(gs_a), Tensor(gs_b))
        gx, grads[f"{self.name}.squeeze"] = _unwrap(
            ops.conv2d_backward(x, squeeze, ops.relu_backward(s_pre, gs)))
        self._cache = None
        return Tensor(gx)


def _unwrap(pair):
    grad_input, grad_kernel = pair
    return grad_input.data, grad_kernel.data


class ConvBlock(Layer):
    """Plain k x k convolution + ReLU (the U-Net building block)."""

    kind = "conv"
    depth = 1

    def __init__(self, name: str, in_channels: int, out_channels: int, kernel_size: int = 3, rate: int = 1):
        super().__init__(name, in_channels, out_channels)
        self.kernel_size = kernel_size
        self.rate = rate
        self._cache = None

    def param_specs(self):
        k = self.kernel_size
        return [ParamSpec(f"{self.name}.kernel", (self.out_channels, self.in_channels, k, k),
                          self.in_channels * k * k)]

    def forward(self, x, params, skips):
        pre = ops.conv2d(x, _conv(params, f"{self.name}.kernel", self.rate))
        self._cache = (x, pre)
        return ops.relu(pre)

    def backward(self, grad, params, grads, skip_grads):
        x, pre = self._cache
        gx, grads[f"{self.name}.kernel"] = _unwrap(ops.conv2d_backward(
            x, _conv(params, f"{self.name}.kernel", self.rate), ops.relu_backward(pre, grad)))
        self._cache = None
        return Tensor(gx)


class MaxPool(Layer):
    kind = "pool"
    scale = -1

    def __init__(self, name: str, channels: int):
        super().__init__(name, channels, channels)
        self._cache = None

    def forward(self, x, params, skips):
        out, argmax = ops.maxpool2d(x)
        self._cache = (argmax, x.shape)
        return out

    def backward(self, grad, params, grads, skip_grads):
        argmax, shape = self._cache
        self._cache = None
        return ops.maxpool2d_backward(grad, argmax, shape)


class Deconv(Layer):
    """2x2 stride-2 transposed convolution followed by ReLU."""

    kind = "deconv"
    scale = 1
    depth = 1

    def __init__(self, name: str, in_channels: int, out_channels: int):
        super().__init__(name, in_channels, out_channels)
        self._cache = None

    def param_specs(self):
        return [ParamSpec(f"{self.name}.kernel", (self.in_channels, self.out_channels, 2, 2),
                          self.in_channels * 4)]

    def forward(self, x, params, skips):
        pre = ops.conv_transpose2d(x, Tensor(params[f"{self.name}.kernel"]))
        self._cache = (x, pre)
        return ops.relu(pre)

    def backward(self, grad, params, grads, skip_grads):
        x, pre = self._cache
        gx, grads[f"{self.name}.kernel"] = _unwrap(ops.conv_transpose2d_backward(
            x, Tensor(params[f"{self.name}.kernel"]), ops.relu_backward(pre, grad)))
        self._cache = None
        return Tensor(gx)


class Upsample(Layer):
    """Parameter-free nearest-neighbour 2x up-sampling."""

    kind = "upsample"
    scale = 1

    def __init__(self, name: str, channels: int):
        super().__init__(name, channels, channels)

    def forward(self, x, params, skips):
        return ops.upsample_nearest2x(x)

    def backward(self, grad, params, grads, skip_grads):
        return ops.upsample_nearest2x_backward(grad)


class SkipSource(Layer):
    """Identity node that publishes its input as the start of a bypass edge."""

    kind = "skip"

    def __init__(self, name: str, channels: int, slot: str):
        super().__init__(name, channels, channels)
        self.slot = slot

    def forward(self, x, params, skips):
        skips[self.slot] = x
        return x

    def backward(self, grad, params, grads, skip_grads):
        pending = skip_grads.pop(self.slot, None)
        if pending is None:
            return grad
        return ops.add_elementwise(grad, pending)


class Junction(Layer):
    """End of a bypass edge: elementwise add or channel concat (skip first)."""

    def __init__(self, name: str, in_channels: int, skip_channels: int, slot: str, mode: str):
        out = in_channels if mode == "add" else in_channels + skip_channels
        super().__init__(name, in_channels, out)
        self.skip_channels = skip_channels
        self.slot = slot
        self.mode = mode
        self.kind = mode

    def forward(self, x, params, skips):
        skip = skips[self.slot]
        if self.mode == "add":
            return ops.add_elementwise(x, skip)
        return ops.concat_channels(skip, x)

    def backward(self, grad, params, grads, skip_grads):
        if self.mode == "add":
            g_main, g_skip = ops.add_elementwise_backward(grad)
        else:
            g_skip, g_main = ops.concat_channels_backward(grad, self.skip_channels)
        skip_grads[self.slot] = g_skip
        return g_main


class Classifier(Layer):
    """Final 1x1 convolution to class logits followed by channel softmax.

    backward() takes the gradient with respect to the logits.
    """

    kind = "classifier"
    depth = 2

    def __init__(self, name: str, in_channels: int, n_classes: int):
        super().__init__(name, in_channels, n_classes)
        self._cache = None
        self.logits = None

    def param_specs(self):
        return [ParamSpec(f"{self.name}.kernel", (self.out_channels, self.in_channels, 1, 1),
                          self.in_channels)]

    def forward(self, x, params, skips):
        self.logits = ops.conv2d(x, _conv(params, f"{self.name}.kernel"))
        self._cache = x
        return ops.softmax_channels(self.logits)

    def backward(self, grad_logits, params, grads, skip_grads):
        x = self._cache
        gx, grads[f"{self.name}.kernel"] = _unwrap(ops.conv2d_backward(
            x, _conv(params, f"{self.name}.kernel"), grad_logits))
        self._cache = None
        return Tensor(gx)

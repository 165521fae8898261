"""Forward and backward kernels for every layer primitive.

Convolutions are cross-correlations computed im2col-style: a strided window
view of the zero-padded input is contracted against the kernel with
`np.tensordot`. Gradients with respect to the input are scattered back one
kernel tap at a time, so the reduction order is fixed and results are
bitwise reproducible.
"""
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import DimensionError, ParameterError
from engine.tensor import ConvParams, Tensor, check_axis


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _same_padding(size: int, k: int, rate: int, stride: int) -> Tuple[int, int]:
    """TF-style SAME padding; an odd total puts the extra pixel bottom/right."""
    effective = (k - 1) * rate + 1
    out = -(-size // stride)
    total = max((out - 1) * stride + effective - size, 0)
    return total // 2, total - total // 2


def _geometry(shape, params: ConvParams):
    _, _, height, width = shape
    kh, kw = params.kernel_size
    rate, stride = params.dilation_rate, params.stride
    if params.padding_mode == "SAME":
        pad_h = _same_padding(height, kh, rate, stride)
        pad_w = _same_padding(width, kw, rate, stride)
    else:
        pad_h = pad_w = (0, 0)
    eff_h, eff_w = (kh - 1) * rate + 1, (kw - 1) * rate + 1
    padded_h, padded_w = height + sum(pad_h), width + sum(pad_w)
    if eff_h > padded_h:
        raise DimensionError(
            f"effective kernel height {eff_h} exceeds padded input height {padded_h}", axis="height"
        )
    if eff_w > padded_w:
        raise DimensionError(
            f"effective kernel width {eff_w} exceeds padded input width {padded_w}", axis="width"
        )
    out_h = (padded_h - eff_h) // stride + 1
    out_w = (padded_w - eff_w) // stride + 1
    return pad_h, pad_w, out_h, out_w


def _padded(x: np.ndarray, pad_h, pad_w) -> np.ndarray:
    if pad_h == (0, 0) and pad_w == (0, 0):
        return x
    return np.pad(x, ((0, 0), (0, 0), pad_h, pad_w))


def _windows(xp: np.ndarray, params: ConvParams, out_h: int, out_w: int) -> np.ndarray:
    """View of shape (N, C, out_h, out_w, kh, kw) over the padded input."""
    kh, kw = params.kernel_size
    rate, stride = params.dilation_rate, params.stride
    eff_h, eff_w = (kh - 1) * rate + 1, (kw - 1) * rate + 1
    view = sliding_window_view(xp, (eff_h, eff_w), axis=(2, 3))
    view = view[:, :, ::stride, ::stride, ::rate, ::rate]
    return view[:, :, :out_h, :out_w]


def _kernel(params: ConvParams, dtype) -> np.ndarray:
    return params.kernel.data.astype(dtype, copy=False)


def conv2d(x: Tensor, params: ConvParams) -> Tensor:
    """Dilated, bias-free cross-correlation."""
    check_axis("channels", params.in_channels, x.shape[1], "conv2d input")
    pad_h, pad_w, out_h, out_w = _geometry(x.shape, params)
    w = _kernel(params, x.dtype)
    kh, kw = params.kernel_size
    if kh == 1 and kw == 1 and pad_h == (0, 0) and pad_w == (0, 0):
        xs = x.data[:, :, ::params.stride, ::params.stride]
        out = np.tensordot(xs, w[:, :, 0, 0], axes=([1], [1]))
        return Tensor.frozen(np.ascontiguousarray(out.transpose(0, 3, 1, 2)))
    cols = _windows(_padded(x.data, pad_h, pad_w), params, out_h, out_w)
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))
    return Tensor.frozen(np.ascontiguousarray(out.transpose(0, 3, 1, 2)))


def conv2d_backward(x: Tensor, params: ConvParams, grad_out: Tensor) -> Tuple[Tensor, Tensor]:
    """Gradients of a conv2d with respect to its input and its kernel."""
    check_axis("channels", params.in_channels, x.shape[1], "conv2d_backward input")
    pad_h, pad_w, out_h, out_w = _geometry(x.shape, params)
    expected = (x.shape[0], params.out_channels, out_h, out_w)
    for axis, want, got in zip(("batch", "channels", "height", "width"), expected, grad_out.shape):
        check_axis(axis, want, got, "conv2d_backward grad_out")

    w = _kernel(params, x.dtype)
    g = grad_out.data.astype(x.dtype, copy=False)
    kh, kw = params.kernel_size
    rate, stride = params.dilation_rate, params.stride

    xp = _padded(x.data, pad_h, pad_w)
    cols = _windows(xp, params, out_h, out_w)
    grad_kernel = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))

    grad_cols = np.tensordot(g, w, axes=([1], [0]))  # (N, out_h, out_w, C, kh, kw)
    grad_xp = np.zeros(xp.shape, dtype=x.dtype)
    span_h = (out_h - 1) * stride + 1
    span_w = (out_w - 1) * stride + 1
    for i in range(kh):
        for j in range(kw):
            top, left = i * rate, j * rate
            grad_xp[:, :, top:top + span_h:stride, left:left + span_w:stride] += (
                grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    height, width = x.shape[2], x.shape[3]
    grad_input = grad_xp[:, :, pad_h[0]:pad_h[0] + height, pad_w[0]:pad_w[0] + width]
    return (
        Tensor.frozen(np.ascontiguousarray(grad_input)),
        Tensor.frozen(np.ascontiguousarray(grad_kernel)),
    )


# ---------------------------------------------------------------------------
# transposed convolution (2x2, stride 2)
# ---------------------------------------------------------------------------

def _check_deconv_kernel(x: Tensor, kernel: Tensor):
    if kernel.shape[2:] != (2, 2):
        raise ParameterError(f"deconvolution kernel must be 2x2, got {kernel.shape[2:]}")
    check_axis("channels", kernel.shape[0], x.shape[1], "conv_transpose2d input")


def conv_transpose2d(x: Tensor, kernel: Tensor) -> Tensor:
    """Stride-2 2x2 transposed convolution; kernel is (C_in, C_out, 2, 2)."""
    _check_deconv_kernel(x, kernel)
    n, _, height, width = x.shape
    c_out = kernel.shape[1]
    k = kernel.data.astype(x.dtype, copy=False)
    out = np.tensordot(x.data, k, axes=([1], [0]))  # (N, H, W, C_out, 2, 2)
    out = out.transpose(0, 3, 1, 4, 2, 5).reshape(n, c_out, 2 * height, 2 * width)
    return Tensor.frozen(np.ascontiguousarray(out))


def conv_transpose2d_backward(x: Tensor, kernel: Tensor, grad_out: Tensor) -> Tuple[Tensor, Tensor]:
    _check_deconv_kernel(x, kernel)
    n, _, height, width = x.shape
    c_out = kernel.shape[1]
    expected = (n, c_out, 2 * height, 2 * width)
    for axis, want, got in zip(("batch", "channels", "height", "width"), expected, grad_out.shape):
        check_axis(axis, want, got, "conv_transpose2d_backward grad_out")
    k = kernel.data.astype(x.dtype, copy=False)
    g = grad_out.data.astype(x.dtype, copy=False).reshape(n, c_out, height, 2, width, 2)
    grad_input = np.tensordot(g, k, axes=([1, 3, 5], [1, 2, 3]))  # (N, H, W, C_in)
    grad_kernel = np.tensordot(x.data, g, axes=([0, 2, 3], [0, 2, 4]))  # (C_in, C_out, 2, 2)
    return (
        Tensor.frozen(np.ascontiguousarray(grad_input.transpose(0, 3, 1, 2))),
        Tensor.frozen(np.ascontiguousarray(grad_kernel)),
    )


# ---------------------------------------------------------------------------
# pooling / upsampling
# ---------------------------------------------------------------------------

def _check_even(shape):
    if shape[2] % 2:
        raise DimensionError(f"2x2 pooling needs an even height, got {shape[2]}", axis="height")
    if shape[3] % 2:
        raise DimensionError(f"2x2 pooling needs an even width, got {shape[3]}", axis="width")


def maxpool2d(x: Tensor) -> Tuple[Tensor, np.ndarray]:
    """2x2 stride-2 max pooling; returns the output and per-window argmax (0..3)."""
    _check_even(x.shape)
    n, c, height, width = x.shape
    windows = x.data.reshape(n, c, height // 2, 2, width // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(n, c, height // 2, width // 2, 4)
    argmax = np.argmax(windows, axis=-1)  # first occurrence wins ties
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return Tensor.frozen(np.ascontiguousarray(out)), argmax


def maxpool2d_backward(grad_out: Tensor, argmax: np.ndarray, input_shape) -> Tensor:
    n, c, height, width = input_shape
    check_axis("height", height // 2, grad_out.shape[2], "maxpool2d_backward grad_out")
    check_axis("width", width // 2, grad_out.shape[3], "maxpool2d_backward grad_out")
    routed = np.zeros((n, c, height // 2, width // 2, 4), dtype=grad_out.dtype)
    np.put_along_axis(routed, argmax[..., None], grad_out.data[..., None], axis=-1)
    routed = routed.reshape(n, c, height // 2, width // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return Tensor.frozen(np.ascontiguousarray(routed.reshape(input_shape)))


def upsample_nearest2x(x: Tensor) -> Tensor:
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    return Tensor.frozen(out)


def upsample_nearest2x_backward(grad_out: Tensor) -> Tensor:
    _check_even(grad_out.shape)
    n, c, height, width = grad_out.shape
    g = grad_out.data.reshape(n, c, height // 2, 2, width // 2, 2)
    return Tensor.frozen(np.ascontiguousarray(g.sum(axis=(3, 5))))


# ---------------------------------------------------------------------------
# elementwise / channel ops
# ---------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    return Tensor.frozen(np.maximum(x.data, 0))


def relu_backward(x: Tensor, grad_out: Tensor) -> Tensor:
    """Masks by x > 0; the subgradient at exactly zero is 0."""
    _check_same(x, grad_out, "relu_backward")
    return Tensor.frozen(np.where(x.data > 0, grad_out.data, 0).astype(grad_out.dtype, copy=False))


def softmax_channels(x: Tensor) -> Tensor:
    """Per-pixel softmax across the channel axis."""
    if x.shape[1] < 1:
        raise DimensionError("softmax needs at least one channel", axis="channels")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return Tensor.frozen(exp / exp.sum(axis=1, keepdims=True))


def _check_same(a: Tensor, b: Tensor, what: str):
    for axis, x, y in zip(("batch", "channels", "height", "width"), a.shape, b.shape):
        check_axis(axis, x, y, what)


def add_elementwise(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "add")
    return Tensor.frozen(a.data + b.data)


def add_elementwise_backward(grad_out: Tensor) -> Tuple[Tensor, Tensor]:
    return grad_out, grad_out


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along channels, a's channels first."""
    for axis, x, y in (("batch", a.shape[0], b.shape[0]),
                       ("height", a.shape[2], b.shape[2]),
                       ("width", a.shape[3], b.shape[3])):
        check_axis(axis, x, y, "concat")
    return Tensor.frozen(np.concatenate([a.data, b.data], axis=1))


def concat_channels_backward(grad_out: Tensor, split: int) -> Tuple[Tensor, Tensor]:
    """Split a concat gradient at channel index `split`."""
    g = grad_out.data
    return (
        Tensor.frozen(np.ascontiguousarray(g[:, :split])),
        Tensor.frozen(np.ascontiguousarray(g[:, split:])),
    )

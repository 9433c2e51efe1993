"""
Differentiable Ops for RSLab
softmax family, cross-entropy, 2D convolution and the LSTM cell
"""

from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from numerics.tensor import DTYPE, Tensor, matmul, unbroadcast
from utils.errors import ContractError, DimensionError


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along `axis`"""
    x = Tensor.lift(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def _backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (x,), "softmax", _backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = Tensor.lift(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))

    def _backward(g):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return Tensor.from_op(out, (x,), "log_softmax", _backward)


def cross_entropy(logits: Tensor, targets: np.ndarray, mask: Optional[np.ndarray] = None) -> Tensor:
    """Mean token cross-entropy over unmasked rows

    logits: (N, V); targets: (N,) int; mask: (N,) in {0, 1}
    """
    logits = Tensor.lift(logits)
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects (N, V) logits, got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64)
    n, v = logits.shape
    if targets.shape != (n,):
        raise DimensionError(f"targets shape {targets.shape} != ({n},)")
    mask = np.ones(n, dtype=DTYPE) if mask is None else np.asarray(mask, dtype=DTYPE)
    count = float(mask.sum())
    if count <= 0:
        raise ContractError("cross_entropy over an all-masked batch")

    shifted = logits.data - np.max(logits.data, axis=1, keepdims=True)
    logp = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    rows = np.arange(n)
    loss = -np.sum(mask * logp[rows, targets]) / count

    def _backward(g):
        grad = np.exp(logp)
        grad[rows, targets] -= 1.0
        return (grad * (mask / count)[:, None] * g,)

    return Tensor.from_op(np.asarray(loss), (logits,), "cross_entropy", _backward)


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Cross-correlation of (C_in, H, W) or (B, C_in, H, W) input with (C_out, C_in, k, k) kernel"""
    x, kernel = Tensor.lift(x), Tensor.lift(kernel)
    squeeze = x.ndim == 3
    if squeeze:
        x = x.reshape((1,) + x.shape)
    if x.ndim != 4 or kernel.ndim != 4:
        raise DimensionError(f"conv2d shapes unsupported: input {x.shape}, kernel {kernel.shape}")
    batch, c_in, height, width = x.shape
    c_out, k_in, k, k2 = kernel.shape
    if k_in != c_in:
        raise DimensionError(f"conv2d channel mismatch: input has {c_in}, kernel expects {k_in}")
    if k != k2:
        raise DimensionError(f"conv2d needs square kernels, got {k}x{k2}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    out_h = (xp.shape[2] - k) // stride + 1
    out_w = (xp.shape[3] - k) // stride + 1
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"conv2d input {height}x{width} smaller than kernel {k}x{k}")
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :out_h, :out_w]
    w = kernel.data
    out = np.einsum("bchwij,ocij->bohw", windows, w, optimize=True)
    parents = [x, kernel]
    if bias is not None:
        bias = Tensor.lift(bias)
        if bias.shape != (c_out,):
            raise DimensionError(f"conv2d bias shape {bias.shape} != ({c_out},)")
        out = out + bias.data[None, :, None, None]
        parents.append(bias)
    padded_shape = xp.shape

    def _backward(g):
        grad_w = np.einsum("bchwij,bohw->ocij", windows, g, optimize=True)
        grad_cols = np.einsum("bohw,ocij->bchwij", g, w, optimize=True)
        grad_xp = np.zeros(padded_shape, dtype=DTYPE)
        for i in range(k):
            for j in range(k):
                grad_xp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += grad_cols[..., i, j]
        grad_x = grad_xp[:, :, padding:padding + height, padding:padding + width] if padding else grad_xp
        grads = [grad_x, grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    result = Tensor.from_op(out, parents, "conv2d", _backward)
    return result.reshape(result.shape[1:]) if squeeze else result


def max_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping max pooling over (B, C, H, W); trailing rows/cols that do not fill a window are dropped"""
    x = Tensor.lift(x)
    batch, channels, height, width = x.shape
    out_h, out_w = height // size, width // size
    cropped = x.data[:, :, :out_h * size, :out_w * size]
    blocks = cropped.reshape(batch, channels, out_h, size, out_w, size)
    out = blocks.max(axis=(3, 5))
    # first maximum in each window receives the gradient
    flat = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(batch, channels, out_h, out_w, size * size)
    winner = np.argmax(flat, axis=-1)
    shape = x.shape

    def _backward(g):
        routed = np.zeros_like(flat)
        np.put_along_axis(routed, winner[..., None], g[..., None], axis=-1)
        routed = routed.reshape(batch, channels, out_h, out_w, size, size).transpose(0, 1, 2, 4, 3, 5)
        full = np.zeros(shape, dtype=DTYPE)
        full[:, :, :out_h * size, :out_w * size] = routed.reshape(batch, channels, out_h * size, out_w * size)
        return (full,)

    return Tensor.from_op(out, (x,), "max_pool2d", _backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x @ weight^T (+ bias), weight stored as (out, in)"""
    out = matmul(x, weight.T)
    return out + bias if bias is not None else out


def lstm_cell(
    x: Tensor,
    h: Tensor,
    c: Tensor,
    params: dict,
) -> Tuple[Tensor, Tensor]:
    """One LSTM step over (..., d_in) inputs

    params: {"W_ih": (4d_h, d_in), "W_hh": (4d_h, d_h), "b": (4d_h,)}; gate
    order input, forget, candidate, output.
    """
    w_ih, w_hh, b = params["W_ih"], params["W_hh"], params["b"]
    d_h = w_hh.shape[1]
    if w_ih.shape[0] != 4 * d_h or w_hh.shape[0] != 4 * d_h or b.shape != (4 * d_h,):
        raise DimensionError(
            f"LSTM params inconsistent: W_ih {w_ih.shape}, W_hh {w_hh.shape}, b {b.shape}"
        )
    if x.shape[-1] != w_ih.shape[1]:
        raise DimensionError(f"LSTM input dim {x.shape[-1]} != {w_ih.shape[1]}")
    if h.shape[-1] != d_h or c.shape[-1] != d_h:
        raise DimensionError(f"LSTM state dims {h.shape}/{c.shape} != {d_h}")

    squeeze = x.ndim == 1
    if squeeze:
        x, h, c = x.reshape(1, -1), h.reshape(1, -1), c.reshape(1, -1)
    gates = linear(x, w_ih) + linear(h, w_hh) + b
    i = gates[..., 0:d_h].sigmoid()
    f = gates[..., d_h:2 * d_h].sigmoid()
    g = gates[..., 2 * d_h:3 * d_h].tanh()
    o = gates[..., 3 * d_h:4 * d_h].sigmoid()
    c_next = f * c + i * g
    h_next = o * c_next.tanh()
    if squeeze:
        return h_next.reshape(-1), c_next.reshape(-1)
    return h_next, c_next


def sincos_table(positions: np.ndarray, dim: int, base: float = 1000.0) -> np.ndarray:
    """pe(pos, 2i) = sin(pos / base^(2i/dim)), pe(pos, 2i+1) = cos(...)"""
    positions = np.asarray(positions, dtype=DTYPE)[:, None]
    two_i = np.arange(0, dim, 2, dtype=DTYPE)
    angles = positions / np.power(base, two_i / dim)
    table = np.zeros((positions.shape[0], dim), dtype=DTYPE)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)[:, : dim // 2]
    return table


__all__ = [
    "softmax", "log_softmax", "cross_entropy", "conv2d", "max_pool2d",
    "linear", "lstm_cell", "sincos_table", "unbroadcast",
]

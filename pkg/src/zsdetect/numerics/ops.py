"""Differentiable operations over :class:`~zsdetect.numerics.tensor.Tensor`.

Everything the detector's forward/backward passes need: elementwise
arithmetic with broadcasting, matmul, 2-D convolution (im2col + GEMM,
with the input gradient computed as a transposed convolution), leaky
ReLU, sigmoid, softmax, max pooling, reductions and indexing.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, record

_f32 = np.float32


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=_f32))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.astype(_f32, copy=False)


def _binary(name, a, b, fwd, bwd_a, bwd_b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(fwd(a.data, b.data), requires_grad=a.requires_grad or b.requires_grad)

    def backward(g):
        ga = _unbroadcast(bwd_a(g, a.data, b.data), a.shape) if a.requires_grad else None
        gb = _unbroadcast(bwd_b(g, a.data, b.data), b.shape) if b.requires_grad else None
        return ga, gb

    record(name, (a, b), out, backward)
    return out


def add(a, b) -> Tensor:
    return _binary("add", a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary("sub", a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary("mul", a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b) -> Tensor:
    return _binary(
        "div", a, b, lambda x, y: x / y, lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y)
    )


def neg(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(-a.data, requires_grad=a.requires_grad)
    record("neg", (a,), out, lambda g: (-g,))
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, requires_grad=a.requires_grad or b.requires_grad)

    def backward(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    record("matmul", (a, b), out, backward)
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0), requires_grad=a.requires_grad)
    mask = a.data > 0

    def backward(g):
        return (g * mask,)

    record("relu", (a,), out, backward)
    return out


def leaky_relu(a: Tensor, slope: float) -> Tensor:
    """Elementwise max(x, slope*x); slope must lie in (0, 1)."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must be in (0, 1), got {slope}")
    data = a.data
    out = Tensor(np.where(data > 0, data, _f32(slope) * data), requires_grad=a.requires_grad)
    mask = data > 0

    def backward(g):
        return (np.where(mask, g, _f32(slope) * g),)

    record("leaky_relu", (a,), out, backward)
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)
    out = Tensor(out_data, requires_grad=a.requires_grad)

    def backward(g):
        return (g * out_data * (1.0 - out_data),)

    record("sigmoid", (a,), out, backward)
    return out


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)
    out = Tensor(out_data, requires_grad=a.requires_grad)
    record("exp", (a,), out, lambda g: (g * out_data,))
    return out


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)
    out = Tensor(out_data, requires_grad=a.requires_grad)
    record("sqrt", (a,), out, lambda g: (g * 0.5 / out_data,))
    return out


def softmax(a: Tensor, axis: int) -> Tensor:
    """Softmax along ``axis``, computed with max-subtraction in float64."""
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ValueError(f"softmax axis {axis} invalid for shape {a.shape}")
    x = a.data.astype(np.float64)
    x = x - x.max(axis=axis, keepdims=True)
    e = np.exp(x)
    y64 = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y64.astype(_f32), requires_grad=a.requires_grad)
    y = out.data

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    record("softmax", (a,), out, backward)
    return out


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Sum with float64 accumulation (deterministic pairwise order)."""
    out64 = np.sum(a.data, axis=axis, keepdims=keepdims, dtype=np.float64)
    out = Tensor(np.asarray(out64, dtype=_f32), requires_grad=a.requires_grad)
    in_shape = a.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g.reshape(()), in_shape).astype(_f32),)
        axes = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, in_shape).astype(_f32),)

    record("sum", (a,), out, backward)
    return out


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else np.prod(
        [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(np.ascontiguousarray(a.data).reshape(shape), requires_grad=a.requires_grad)
    in_shape = a.shape
    record("reshape", (a,), out, lambda g: (g.reshape(in_shape),))
    return out


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    out = Tensor(np.ascontiguousarray(a.data.transpose(axes)), requires_grad=a.requires_grad)
    inverse = tuple(np.argsort(axes))
    record("transpose", (a,), out, lambda g: (g.transpose(inverse),))
    return out


def gather_rows(a: Tensor, indices) -> Tensor:
    """Select rows of a 2-D tensor; backward scatter-adds."""
    if a.data.ndim != 2:
        raise ValueError(f"gather_rows expects a 2-D tensor, got shape {a.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor(a.data[idx], requires_grad=a.requires_grad)
    rows, cols = a.shape

    def backward(g):
        grad = np.zeros((rows, cols), dtype=_f32)
        np.add.at(grad, idx, g)
        return (grad,)

    record("gather_rows", (a,), out, backward)
    return out


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice along the last axis."""
    out = Tensor(np.ascontiguousarray(a.data[..., start:stop]), requires_grad=a.requires_grad)
    in_shape = a.shape

    def backward(g):
        grad = np.zeros(in_shape, dtype=_f32)
        grad[..., start:stop] = g
        return (grad,)

    record("slice_cols", (a,), out, backward)
    return out


def _im2col(padded: np.ndarray, kh: int, kw: int, stride: int):
    """(N,C,Hp,Wp) -> (N*Ho*Wo, C*kh*kw) patch matrix plus (Ho, Wo)."""
    n, c, hp, wp = padded.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    win = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    return np.ascontiguousarray(cols), ho, wo


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None, stride: int, pad: int):
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols, ho, wo = _im2col(x, kh, kw, stride)
    out = cols @ w.reshape(f, -1).T
    if b is not None:
        out += b
    return out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2).copy(), cols


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation with zero padding.

    Output spatial size is floor((H + 2*pad - kh)/stride) + 1. The input
    gradient is computed as a stride-dilated transposed convolution so
    all three passes run as GEMMs.
    """
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ValueError(
            f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}"
        )
    n, c, h, w_in = x.shape
    f, cw, kh, kw = weight.shape
    if cw != c:
        raise ValueError(f"conv2d channel mismatch: input has {c}, weight expects {cw}")
    if bias is not None and bias.shape != (f,):
        raise ValueError(f"conv2d bias must have shape ({f},), got {bias.shape}")
    if stride < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {stride}")
    if kh > h + 2 * pad or kw > w_in + 2 * pad:
        raise ValueError(
            f"conv2d kernel {kh}x{kw} larger than padded input {h + 2 * pad}x{w_in + 2 * pad}"
        )

    out_data, cols = _conv_forward(x.data, weight.data, None if bias is None else bias.data, stride, pad)
    inputs = (x, weight) if bias is None else (x, weight, bias)
    out = Tensor(out_data, requires_grad=any(t.requires_grad for t in inputs))
    ho, wo = out_data.shape[2], out_data.shape[3]

    def backward(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
        gw = (gmat.T @ cols).reshape(f, c, kh, kw) if weight.requires_grad else None
        gb = None
        if bias is not None and bias.requires_grad:
            gb = np.sum(g, axis=(0, 2, 3), dtype=np.float64).astype(_f32)
        gx = None
        if x.requires_grad:
            if stride > 1:
                dil = np.zeros((n, f, (ho - 1) * stride + 1, (wo - 1) * stride + 1), dtype=_f32)
                dil[:, :, ::stride, ::stride] = g
            else:
                dil = g
            dil = np.pad(dil, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
            w_t = weight.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
            gxp, _ = _conv_forward(dil, np.ascontiguousarray(w_t), None, 1, 0)
            full = np.zeros((n, c, h + 2 * pad, w_in + 2 * pad), dtype=_f32)
            full[:, :, : gxp.shape[2], : gxp.shape[3]] = gxp
            gx = full[:, :, pad : pad + h, pad : pad + w_in]
        grads = [gx, gw]
        if bias is not None:
            grads.append(gb)
        return grads

    record("conv2d", inputs, out, backward)
    return out


def max_pool2d(x: Tensor, size: int, stride: int | None = None) -> Tensor:
    """Max pooling over non-overlapping (or strided) square windows."""
    if stride is None:
        stride = size
    n, c, h, w = x.shape
    win = sliding_window_view(x.data, (size, size), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, ho, wo, size * size)
    arg = flat.argmax(axis=-1)
    out = Tensor(np.ascontiguousarray(flat.max(axis=-1)), requires_grad=x.requires_grad)

    def backward(g):
        grad = np.zeros((n, c, h, w), dtype=_f32)
        ni, ci, ii, ji = np.indices((n, c, ho, wo))
        rows = ii * stride + arg // size
        colsx = ji * stride + arg % size
        np.add.at(grad, (ni, ci, rows, colsx), g)
        return (grad,)

    record("max_pool2d", (x,), out, backward)
    return out

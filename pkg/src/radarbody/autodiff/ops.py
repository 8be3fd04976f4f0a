"""Differentiable operations.

Every op validates shapes, computes the forward value with numpy, and
registers a closure computing the parent gradients from the output gradient.
Binary ops follow numpy broadcasting; gradients are summed back over the
broadcast axes.  All arrays are float64.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, ContractError, DimensionError
from ..seeding import seeded_rng
from .engine import Tensor, as_tensor, record


def _reduce_to_shape(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` over the axes that numpy broadcasting expanded."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, batch dims broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions disagree: {a.shape} vs {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise DimensionError(f"matmul batch dims incompatible: {a.shape} vs {b.shape}") from exc
    need_a, need_b = a.requires_grad, b.requires_grad

    def backward_fn(g):
        ga = (_reduce_to_shape(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
              if need_a else None)
        gb = (_reduce_to_shape(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
              if need_b else None)
        return ga, gb

    return record(out, (a, b), backward_fn, "matmul")


def _binary(op: str, a: Tensor, b: Tensor, fwd, grad_a, grad_b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = fwd(a.data, b.data)
    except ValueError as exc:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from exc
    need_a, need_b = a.requires_grad, b.requires_grad

    def backward_fn(g):
        return (_reduce_to_shape(grad_a(g, a.data, b.data), a.shape) if need_a else None,
                _reduce_to_shape(grad_b(g, a.data, b.data), b.shape) if need_b else None)

    return record(out, (a, b), backward_fn, op)


def add(a, b) -> Tensor:
    return _binary("add", a, b, np.add, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary("sub", a, b, np.subtract, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary("mul", a, b, np.multiply, lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b) -> Tensor:
    return _binary("div", a, b, np.divide,
                   lambda g, x, y: g / y,
                   lambda g, x, y: -g * x / (y * y))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return record(-a.data, (a,), lambda g: (-g,), "neg")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0.0
    return record(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return record(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return record(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


_ELEMENTWISE = {"add": (add, 2), "mul": (mul, 2), "relu": (relu, 1),
                "sigmoid": (sigmoid, 1), "tanh": (tanh, 1)}


def elementwise(op_code: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    """Dispatch by name; binary codes need ``b``, unary codes forbid it."""
    if op_code not in _ELEMENTWISE:
        raise ConfigurationError(f"unknown elementwise op {op_code!r}")
    fn, arity = _ELEMENTWISE[op_code]
    if arity == 2:
        if b is None:
            raise ContractError(f"elementwise {op_code!r} needs two operands")
        return fn(a, b)
    if b is not None:
        raise ContractError(f"elementwise {op_code!r} takes a single operand")
    return fn(a)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if not -x.data.ndim <= axis < x.data.ndim:
        raise DimensionError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return record(out, (x,), backward_fn, "softmax")


def concat_last_axis(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis; all leading extents must agree."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ContractError("concat_last_axis needs at least one part")
    lead = parts[0].shape[:-1]
    for p in parts[1:]:
        if p.shape[:-1] != lead:
            raise DimensionError(
                f"concat_last_axis leading shapes disagree: {parts[0].shape} vs {p.shape}")
    out = np.concatenate([p.data for p in parts], axis=-1)
    widths = [p.shape[-1] for p in parts]
    splits = np.cumsum(widths)[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=-1))

    return record(out, tuple(parts), backward_fn, "concat")


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    shape = parts[0].shape
    for p in parts[1:]:
        if p.shape != shape:
            raise DimensionError(f"stack shapes disagree: {shape} vs {p.shape}")
    out = np.stack([p.data for p in parts], axis=axis)

    def backward_fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

    return record(out, tuple(parts), backward_fn, "stack")


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)
    return record(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose_last2(x) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim < 2:
        raise DimensionError(f"transpose_last2 needs rank >= 2, got {x.shape}")
    out = np.swapaxes(x.data, -1, -2)
    return record(out, (x,), lambda g: (np.swapaxes(g, -1, -2),), "transpose")


def narrow(x, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice ``[start, start+length)`` along ``axis``."""
    x = as_tensor(x)
    axis = axis % x.data.ndim
    if start < 0 or start + length > x.shape[axis]:
        raise DimensionError(
            f"narrow [{start}:{start + length}] out of range for axis {axis} of {x.shape}")
    idx = tuple(slice(None) if a != axis else slice(start, start + length)
                for a in range(x.data.ndim))
    out = x.data[idx]

    def backward_fn(g):
        gx = np.zeros(x.shape)
        gx[idx] = g
        return (gx,)

    return record(out, (x,), backward_fn, "narrow")


def take(x, indices: np.ndarray, axis: int = 0) -> Tensor:
    """Gather with a constant integer index array (not differentiated)."""
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.intp)
    out = np.take(x.data, indices, axis=axis)
    prefix = (slice(None),) * (axis % x.data.ndim)

    def backward_fn(g):
        gx = np.zeros(x.shape)
        np.add.at(gx, prefix + (indices,), g)
        return (gx,)

    return record(out, (x,), backward_fn, "take")


def gather_frames(x, indices: np.ndarray) -> Tensor:
    """Per-frame gather: ``out[f, ...] = x[f, indices[f, ...], ...]``.

    ``x`` is (F, N, *rest) and ``indices`` an integer array (F, *idx); the
    result is (F, *idx, *rest).  Used to pull grouped neighbours out of each
    frame's point set with frame-specific index tables.
    """
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.intp)
    n_frames = x.shape[0]
    if indices.shape[0] != n_frames:
        raise DimensionError(
            f"gather_frames: frame counts disagree ({indices.shape[0]} vs {n_frames})")
    frame_idx = np.arange(n_frames).reshape((n_frames,) + (1,) * (indices.ndim - 1))
    out = x.data[frame_idx, indices]

    def backward_fn(g):
        gx = np.zeros(x.shape)
        np.add.at(gx, (frame_idx, indices), g)
        return (gx,)

    return record(out, (x,), backward_fn, "gather_frames")


def reduce_sum(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        ge = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(ge, x.shape).copy(),)

    return record(out, (x,), backward_fn, "sum")


def reduce_mean(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.shape[axis]
    return mul(reduce_sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def broadcast_to(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast {x.shape} to {tuple(shape)}") from exc
    return record(out.copy(), (x,), lambda g: (_reduce_to_shape(g, x.shape),), "broadcast")


def absolute(x) -> Tensor:
    x = as_tensor(x)
    sign = np.sign(x.data)
    return record(np.abs(x.data), (x,), lambda g: (g * sign,), "abs")


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return record(out, (x,), lambda g: (g * 0.5 / out,), "sqrt")


def clip(x, low: float, high: float) -> Tensor:
    """Clamp values; gradient passes only where the input was not clipped."""
    x = as_tensor(x)
    mask = (x.data >= low) & (x.data <= high)
    out = np.clip(x.data, low, high)
    return record(out, (x,), lambda g: (g * mask,), "clip")


def arccos(x) -> Tensor:
    x = as_tensor(x)
    out = np.arccos(x.data)
    d = -1.0 / np.sqrt(1.0 - x.data * x.data)
    return record(out, (x,), lambda g: (g * d,), "arccos")


def linear_layer(x, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map over the last axis: ``x @ weight + bias``."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if weight.data.ndim != 2:
        raise DimensionError(f"linear_layer weight must be rank 2, got {weight.shape}")
    d_in, d_out = weight.shape
    if x.shape[-1] != d_in:
        raise DimensionError(f"linear_layer input width {x.shape[-1]} != weight rows {d_in}")
    if bias.shape != (d_out,):
        raise DimensionError(f"linear_layer bias shape {bias.shape} != ({d_out},)")
    lead = x.shape[:-1]
    flat = reshape(x, (-1, d_in)) if x.data.ndim != 2 else x
    out = add(matmul(flat, weight), bias)
    return reshape(out, lead + (d_out,)) if x.data.ndim != 2 else out


def dropout(x, ratio: float, training: bool, seed: int) -> Tensor:
    """Inverted dropout; the mask is a pure function of ``seed``."""
    if not 0.0 <= ratio < 1.0:
        raise ConfigurationError(f"dropout ratio must be in [0, 1), got {ratio}")
    x = as_tensor(x)
    if not training or ratio == 0.0:
        return x
    keep = seeded_rng("dropout", seed).random(x.shape) >= ratio
    scale = keep / (1.0 - ratio)
    return record(x.data * scale, (x,), lambda g: (g * scale,), "dropout")


# Operator sugar so network code reads like ordinary numpy.
Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__truediv__ = lambda self, other: div(self, other)
Tensor.__rtruediv__ = lambda self, other: div(other, self)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__matmul__ = lambda self, other: matmul(self, other)

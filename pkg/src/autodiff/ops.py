"""
Primitive operations of the autodiff engine, each computes its forward value and records its vector-Jacobian product
    on the tape of its inputs
"""

from __future__ import annotations

from math import pi, sqrt
from typing import TYPE_CHECKING, Union

import numpy as np
from scipy.special import erf

from src.autodiff.tensor import Tensor

if TYPE_CHECKING:
    from typing import Optional, Sequence, Tuple

    from src.autodiff.tensor import Tape

TensorLike = Union[Tensor, np.ndarray]

GELU_TANH_FACTOR = sqrt(2 / pi)
GELU_CUBIC = 0.044715


def _as_tensor(value: TensorLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value))


def _tape_of(*tensors: Tensor) -> Optional[Tape]:
    return next((tensor.tape for tensor in tensors if tensor.tape is not None), None)


def _output(primitive: str, data: np.ndarray, inputs: Sequence[Tensor], vjp) -> Tensor:
    tape = _tape_of(*inputs)
    output = Tensor(data, tape)
    if tape is not None:
        tape.record(primitive, output, inputs, vjp)
    return output


def _unbroadcast(gradient: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Sums a gradient over the axes that were broadcast to reach the shape of the input
    """
    while gradient.ndim > len(shape):
        gradient = gradient.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and gradient.shape[axis] != 1:
            gradient = gradient.sum(axis=axis, keepdims=True)
    return gradient


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """
    Matrix product over the last two axes, a is (..., m, k) and b is (k, n) or (..., k, n) with the same batch axes
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or (b.ndim > 2 and a.shape[:-2] != b.shape[:-2]):
        raise ValueError(f'matmul: incompatible shapes {a.shape} and {b.shape}')

    def vjp(gradient):
        grad_a = gradient @ np.swapaxes(b.data, -1, -2)
        if b.ndim == 2:
            grad_b = a.data.reshape(-1, a.shape[-1]).T @ gradient.reshape(-1, gradient.shape[-1])
        else:
            grad_b = np.swapaxes(a.data, -1, -2) @ gradient
        return grad_a, grad_b

    return _output('matmul', a.data @ b.data, (a, b), vjp)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    """
    Elementwise sum, b may broadcast against a (for biases)
    """
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ValueError(f'add: incompatible shapes {a.shape} and {b.shape}')

    def vjp(gradient):
        return _unbroadcast(gradient, a.shape), _unbroadcast(gradient, b.shape)

    return _output('add', data, (a, b), vjp)


def scale(a: TensorLike, factor: float) -> Tensor:
    a = _as_tensor(a)
    factor = a.dtype.type(factor)
    return _output('scale', a.data * factor, (a,), lambda gradient: (gradient * factor,))


def transpose(a: TensorLike, axes: Sequence[int]) -> Tensor:
    """
    Permutes the axes of a tensor
    """
    a = _as_tensor(a)
    if sorted(axes) != list(range(a.ndim)):
        raise ValueError(f'transpose: axes {axes} are not a permutation of {a.ndim} axes')
    inverse = np.argsort(axes)
    return _output('transpose', np.transpose(a.data, axes), (a,),
                   lambda gradient: (np.ascontiguousarray(np.transpose(gradient, inverse)),))


def reshape(a: TensorLike, shape: Sequence[int]) -> Tensor:
    a = _as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ValueError(f'reshape: cannot reshape {a.shape} to {tuple(shape)}')
    return _output('reshape', data, (a,), lambda gradient: (gradient.reshape(a.shape),))


def slice_(a: TensorLike, index) -> Tensor:
    """
    Basic (non advanced) indexing of a tensor
    """
    a = _as_tensor(a)
    try:
        data = a.data[index]
    except IndexError:
        raise ValueError(f'slice: index {index} is invalid for shape {a.shape}')

    def vjp(gradient):
        full = np.zeros_like(a.data)
        full[index] = gradient
        return full,

    return _output('slice', data, (a,), vjp)


def concat(tensors: Sequence[TensorLike], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(tensor) for tensor in tensors]
    try:
        data = np.concatenate([tensor.data for tensor in tensors], axis=axis)
    except ValueError:
        raise ValueError(f'concat: incompatible shapes {[tensor.shape for tensor in tensors]} on axis {axis}')
    splits = np.cumsum([tensor.shape[axis] for tensor in tensors])[:-1]

    def vjp(gradient):
        return [np.ascontiguousarray(part) for part in np.split(gradient, splits, axis=axis)]

    return _output('concat', data, tensors, vjp)


def softmax(a: TensorLike) -> Tensor:
    """
    Softmax over the last axis with the row maximum subtracted
    """
    a = _as_tensor(a)
    shifted = np.exp(a.data - a.data.max(axis=-1, keepdims=True))
    probabilities = shifted / shifted.sum(axis=-1, keepdims=True)

    def vjp(gradient):
        return probabilities * (gradient - np.sum(gradient * probabilities, axis=-1, keepdims=True)),

    return _output('softmax', probabilities, (a,), vjp)


def layer_norm(a: TensorLike, gain: TensorLike, bias: TensorLike, eps: float = 1e-5) -> Tensor:
    """
    Layer normalisation over the last axis followed by the affine gain and bias, eps is inside the square root
    """
    a, gain, bias = _as_tensor(a), _as_tensor(gain), _as_tensor(bias)
    if gain.shape != (a.shape[-1],) or bias.shape != (a.shape[-1],):
        raise ValueError(f'layer_norm: gain {gain.shape} and bias {bias.shape} do not match features {a.shape[-1]}')

    centred = a.data - a.data.mean(axis=-1, keepdims=True)
    inverse_std = 1 / np.sqrt(np.mean(centred ** 2, axis=-1, keepdims=True) + a.dtype.type(eps))
    normalised = centred * inverse_std

    def vjp(gradient):
        grad_normalised = gradient * gain.data
        grad_a = inverse_std * (grad_normalised - grad_normalised.mean(axis=-1, keepdims=True) -
                                normalised * np.mean(grad_normalised * normalised, axis=-1, keepdims=True))
        features = gradient.shape[-1]
        grad_gain = np.sum((gradient * normalised).reshape(-1, features), axis=0)
        grad_bias = np.sum(gradient.reshape(-1, features), axis=0)
        return grad_a, grad_gain, grad_bias

    return _output('layer_norm', normalised * gain.data + bias.data, (a, gain, bias), vjp)


def gelu(a: TensorLike, approximate: bool = True) -> Tensor:
    """
    Gaussian error linear unit, the tanh approximation or the exact erf form
    """
    a = _as_tensor(a)
    x = a.data
    if approximate:
        inner = GELU_TANH_FACTOR * (x + GELU_CUBIC * x ** 3)
        tanh = np.tanh(inner)
        data = 0.5 * x * (1 + tanh)
        derivative = 0.5 * (1 + tanh) + 0.5 * x * (1 - tanh ** 2) * GELU_TANH_FACTOR * (1 + 3 * GELU_CUBIC * x ** 2)
    else:
        cdf = 0.5 * (1 + erf(x / sqrt(2)))
        data = x * cdf
        derivative = cdf + x * np.exp(-0.5 * x ** 2) / sqrt(2 * pi)
    derivative = derivative.astype(a.dtype, copy=False)
    return _output('gelu', data.astype(a.dtype, copy=False), (a,), lambda gradient: (gradient * derivative,))


def relu(a: TensorLike) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    return _output('relu', np.where(mask, a.data, 0).astype(a.dtype, copy=False), (a,),
                   lambda gradient: (gradient * mask,))


def embedding_add(a: TensorLike, table: TensorLike) -> Tensor:
    """
    Adds the first T rows of a positional table to a (batch, T, hidden) tensor
    """
    a, table = _as_tensor(a), _as_tensor(table)
    positions = a.shape[-2]
    if positions > table.shape[0] or a.shape[-1] != table.shape[1]:
        raise ValueError(f'embedding_add: {positions} positions of width {a.shape[-1]} do not fit the table '
                         f'{table.shape}')

    def vjp(gradient):
        grad_table = np.zeros_like(table.data)
        grad_table[:positions] = gradient.reshape(-1, positions, a.shape[-1]).sum(axis=0)
        return gradient, grad_table

    return _output('embedding_add', a.data + table.data[:positions], (a, table), vjp)


def mse_masked(prediction: TensorLike, target: np.ndarray, mask: np.ndarray) -> Tensor:
    """
    Mean squared error over the entries selected by the mask
    """
    prediction = _as_tensor(prediction)
    if prediction.shape != target.shape or prediction.shape != mask.shape:
        raise ValueError(f'mse_masked: prediction {prediction.shape}, target {target.shape} and mask {mask.shape} '
                         f'shapes differ')
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise ValueError('mse_masked: the mask selects no entries')

    residual = np.where(mask, prediction.data - target, 0).astype(prediction.dtype, copy=False)
    loss = np.asarray(np.sum(residual ** 2) / count, dtype=prediction.dtype)
    return _output('mse_masked', loss, (prediction,), lambda gradient: (gradient * 2 * residual / count,))


def causal_mask_fill(scores: TensorLike) -> Tensor:
    """
    Fills the entries of (..., T, T) attention scores above the diagonal with -inf so position t attends to <= t
    """
    scores = _as_tensor(scores)
    if scores.ndim < 2 or scores.shape[-1] != scores.shape[-2]:
        raise ValueError(f'causal_mask_fill: scores must be square in the last two axes, got {scores.shape}')
    allowed = np.tril(np.ones(scores.shape[-2:], dtype=bool))
    return _output('causal_mask_fill', np.where(allowed, scores.data, -np.inf).astype(scores.dtype, copy=False),
                   (scores,), lambda gradient: (np.where(allowed, gradient, 0).astype(gradient.dtype, copy=False),))


def sum_all(a: TensorLike) -> Tensor:
    a = _as_tensor(a)
    return _output('sum', np.asarray(a.data.sum(), dtype=a.dtype), (a,),
                   lambda gradient: (np.full_like(a.data, gradient),))

"""
=========================================================================
Tool for video frame interpolation

Created by Bartlomiej Jargut
https://github.com/dee7ine
-------------------------------------------------------------------------
This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.
This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program. If not, see <https://www.gnu.org/licenses/>.

=========================================================================
"""


from __future__ import annotations

import numbers
from typing import Optional, Sequence, Union

import numpy as np
import scipy.special

from Exceptions import DimensionError
from tensor.Tensor import Tensor, as_tensor, result

Axis = Optional[Union[int, tuple[int, ...]]]


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ (no implicit broadcasting)")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('add', a, b)
    return result(a.data + b.data, (a, b), 'add', lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('sub', a, b)
    return result(a.data - b.data, (a, b), 'sub', lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('mul', a, b)
    a_data, b_data = a.data, b.data
    return result(a_data * b_data, (a, b), 'mul', lambda g: (g * b_data, g * a_data))


def div(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('div', a, b)
    a_data, b_data = a.data, b.data
    out = a_data / b_data
    return result(out, (a, b), 'div', lambda g: (g / b_data, -g * out / b_data))


def neg(x: Tensor) -> Tensor:
    return result(-x.data, (x,), 'neg', lambda g: (-g,))


def scale(x: Tensor, factor: float) -> Tensor:
    return result(x.data * factor, (x,), 'scale', lambda g: (g * factor,))


def shift(x: Tensor, offset: float) -> Tensor:
    return result(x.data + offset, (x,), 'shift', lambda g: (g,))


def absolute(x: Tensor) -> Tensor:
    sign = np.sign(x.data)
    return result(np.abs(x.data), (x,), 'abs', lambda g: (g * sign,))


def square(x: Tensor) -> Tensor:
    data = x.data
    return result(data * data, (x,), 'square', lambda g: (2 * g * data,))


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)

    def backward_fn(g):
        # zero subgradient at the origin
        safe = np.where(out > 0, out, 1)
        return (np.where(out > 0, 0.5 * g / safe, 0).astype(out.dtype),)

    return result(out, (x,), 'sqrt', backward_fn)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return result(out, (x,), 'exp', lambda g: (g * out,))


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    positive = x.data > 0
    out = np.where(positive, x.data, x.data * slope)
    return result(out, (x,), 'leaky_relu', lambda g: (np.where(positive, g, g * slope),))


def sigmoid(x: Tensor) -> Tensor:
    out = scipy.special.expit(x.data)
    return result(out, (x,), 'sigmoid', lambda g: (g * out * (1 - out),))


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    shape = x.shape
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return result(out, (x,), 'sum', backward_fn)


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([x.shape[a] for a in axes]))
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    return result(x.data.reshape(shape), (x,), 'reshape', lambda g: (g.reshape(original),))


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    inverse = np.argsort(axes)
    return result(np.transpose(x.data, axes), (x,), 'permute', lambda g: (np.transpose(g, inverse),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return result(out, tuple(tensors), 'concat', lambda g: tuple(np.split(g, splits, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        shape = list(t.shape)
        shape.insert(axis if axis >= 0 else len(shape) + axis + 1, 1)
        expanded.append(reshape(t, shape))
    return concat(expanded, axis=axis)


def _is_basic(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(i is Ellipsis or i is None or isinstance(i, (slice, int, np.integer)) for i in items)


def getitem(x: Tensor, index) -> Tensor:
    shape, dtype = x.shape, x.dtype
    basic = _is_basic(index)

    def backward_fn(g):
        full = np.zeros(shape, dtype=dtype)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return result(np.array(x.data[index]), (x,), 'getitem', backward_fn)


def expand(x: Tensor, shape: Sequence[int]) -> Tensor:
    """
    Explicit broadcast of size-1 axes to the given shape (same rank)

    :param x: tensor
    :param shape: target shape

    :return:
    """

    shape = tuple(shape)
    if x.ndim != len(shape) or any(s != t and s != 1 for s, t in zip(x.shape, shape)):
        raise DimensionError(f"cannot expand {x.shape} to {shape}")
    axes = tuple(i for i, (s, t) in enumerate(zip(x.shape, shape)) if s == 1 and t != 1)
    out = np.broadcast_to(x.data, shape).copy()
    return result(out, (x,), 'expand', lambda g: (np.sum(g, axis=axes, keepdims=True),))


def scatter_add(values: Tensor, index: np.ndarray, size: int) -> Tensor:
    """
    out[k] = sum of values[i] over all i with index[i] == k

    :param values: 1-D tensor
    :param index: integer array, same length as values
    :param size: length of the output

    :return:
    """

    index = np.asarray(index, dtype=np.int64)
    if values.ndim != 1 or index.shape != values.shape:
        raise DimensionError(f"scatter_add: values {values.shape} and index {index.shape} must be matching 1-D")
    out = np.bincount(index, weights=values.data, minlength=size).astype(values.dtype)
    return result(out, (values,), 'scatter_add', lambda g: (g[index],))


def full_like(x: Tensor, value: float) -> Tensor:
    return Tensor(np.full(x.shape, value, dtype=x.dtype))


def _binary(op, scalar_op):
    def method(self: Tensor, other):
        if isinstance(other, numbers.Number):
            return scalar_op(self, other)
        return op(self, as_tensor(other, dtype=self.dtype))
    return method


Tensor.__add__ = _binary(add, shift)
Tensor.__radd__ = Tensor.__add__
Tensor.__sub__ = _binary(sub, lambda x, c: shift(x, -c))
Tensor.__rsub__ = lambda self, other: shift(neg(self), other) if isinstance(other, numbers.Number) \
    else sub(as_tensor(other, dtype=self.dtype), self)
Tensor.__mul__ = _binary(mul, scale)
Tensor.__rmul__ = Tensor.__mul__
Tensor.__truediv__ = _binary(div, lambda x, c: scale(x, 1.0 / c))
Tensor.__rtruediv__ = lambda self, other: div(as_tensor(np.full(self.shape, other, dtype=self.dtype)), self) \
    if isinstance(other, numbers.Number) else div(as_tensor(other, dtype=self.dtype), self)
Tensor.__neg__ = neg
Tensor.__getitem__ = getitem

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

import itertools
from typing import Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from Exceptions import DimensionError
from tensor.Tensor import Tensor, result

IntOrTuple = Union[int, Sequence[int]]


def _expand(value: IntOrTuple, nd: int, name: str) -> tuple[int, ...]:
    if isinstance(value, (int, np.integer)):
        return (int(value),) * nd
    value = tuple(int(v) for v in value)
    if len(value) != nd:
        raise DimensionError(f"{name} needs {nd} entries, got {value}")
    return value


def _convnd(x: Tensor, weight: Tensor, bias: Optional[Tensor], stride: IntOrTuple, padding: IntOrTuple,
            nd: int, op: str) -> Tensor:
    """
    N-d cross-correlation (no kernel flip) over the trailing nd axes.
    Windows are gathered with sliding_window_view and contracted against
    the kernel with a single tensordot; the input gradient is accumulated
    kernel offset by kernel offset.

    :param x: [B, C, *S]
    :param weight: [K, C, *k]
    :param bias: [K] or None
    :param stride: int or per-axis tuple
    :param padding: int or per-axis tuple of zero padding
    :param nd: number of spatial axes (2 or 3)
    :param op: name recorded on the tape

    :return: [B, K, *S']
    """

    if x.ndim != nd + 2 or weight.ndim != nd + 2:
        raise DimensionError(f"{op}: expected {nd + 2}-D input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(f"{op}: input has {x.shape[1]} channels, weight expects {weight.shape[1]}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError(f"{op}: bias shape {bias.shape} does not match {weight.shape[0]} output channels")

    kernel = weight.shape[2:]
    strides = _expand(stride, nd, 'stride')
    pads = _expand(padding, nd, 'padding')
    if any(k % 2 == 0 for k in kernel[-2:]):
        raise DimensionError(f"{op}: spatial kernel sizes must be odd, got {kernel}")
    if any(p < 0 for p in pads) or any(s < 1 for s in strides):
        raise DimensionError(f"{op}: invalid padding {pads} or stride {strides}")

    spatial = tuple(range(2, 2 + nd))
    padded = np.pad(x.data, [(0, 0), (0, 0)] + [(p, p) for p in pads])
    if any(padded.shape[a] < k for a, k in zip(spatial, kernel)):
        raise DimensionError(f"{op}: kernel {kernel} larger than padded input {padded.shape[2:]}")

    windows = sliding_window_view(padded, kernel, axis=spatial)
    windows = windows[(slice(None), slice(None)) + tuple(slice(None, None, s) for s in strides)]
    out_spatial = windows.shape[2:2 + nd]

    w_data = weight.data
    kernel_axes = tuple(range(2 + nd, 2 + 2 * nd))
    out = np.tensordot(windows, w_data, axes=((1,) + kernel_axes, (1,) + spatial))
    out = np.moveaxis(out, -1, 1)
    if bias is not None:
        out = out + bias.data.reshape((1, -1) + (1,) * nd)
    out = np.ascontiguousarray(out)

    def backward_fn(g):
        g_batch_spatial = (0,) + spatial
        grad_w = np.tensordot(g, windows, axes=(g_batch_spatial, g_batch_spatial))
        grad_b = g.sum(axis=g_batch_spatial) if bias is not None else None

        grad_padded = np.zeros(padded.shape, dtype=g.dtype)
        for offset in itertools.product(*(range(k) for k in kernel)):
            tap = w_data[(slice(None), slice(None)) + offset]
            contribution = np.moveaxis(np.tensordot(g, tap, axes=((1,), (0,))), -1, 1)
            target = tuple(slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(offset, strides, out_spatial))
            grad_padded[(slice(None), slice(None)) + target] += contribution
        crop = tuple(slice(p, padded.shape[a] - p) for a, p in zip(spatial, pads))
        grad_x = grad_padded[(slice(None), slice(None)) + crop]
        return grad_x, grad_w, grad_b

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return result(out, inputs, op, backward_fn)


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: IntOrTuple = 1,
           padding: IntOrTuple = 0) -> Tensor:
    """
    2D cross-correlation. H' = (H + 2*padding - kh) // stride + 1

    :param x: [B, C, H, W]
    :param weight: [K, C, kh, kw] with odd kh, kw
    :param bias: [K]
    :param stride: int or (sh, sw)
    :param padding: int or (ph, pw)

    :return: [B, K, H', W']
    """

    return _convnd(x, weight, bias, stride, padding, nd=2, op='conv2d')


def conv3d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: IntOrTuple = 1,
           padding: IntOrTuple = 0) -> Tensor:
    """
    3D cross-correlation over (T, H, W). The temporal kernel extent may be
    even (used to collapse the temporal axis); kh and kw must be odd.

    :param x: [B, C, T, H, W]
    :param weight: [K, C, kt, kh, kw]
    :param bias: [K]
    :param stride: int or (st, sh, sw)
    :param padding: int or (pt, ph, pw)

    :return: [B, K, T', H', W']
    """

    return _convnd(x, weight, bias, stride, padding, nd=3, op='conv3d')

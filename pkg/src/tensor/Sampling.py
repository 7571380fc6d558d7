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

from typing import Optional

import numpy as np

from Exceptions import DimensionError
from tensor.Tensor import Tensor, result


def maxpool_spatial(x: Tensor, stride: int = 2) -> Tensor:
    """
    Max pooling over the two trailing (spatial) axes only, so the temporal
    axis of a 5-D input is preserved. Ties send the gradient to the first
    element of the window in row-major order.

    :param x: [..., H, W] with H and W divisible by the stride
    :param stride: window size and stride (2 in every network)

    :return: [..., H/stride, W/stride]
    """

    shape = x.shape
    if x.ndim < 2:
        raise DimensionError(f"maxpool_spatial needs at least 2 axes, got {shape}")
    h, w = shape[-2:]
    if h % stride or w % stride:
        raise DimensionError(f"maxpool_spatial: spatial size {h}x{w} is not divisible by {stride}")

    lead = shape[:-2]
    blocks = x.data.reshape(lead + (h // stride, stride, w // stride, stride))
    windows = np.moveaxis(blocks, -3, -2).reshape(lead + (h // stride, w // stride, stride * stride))
    index = np.argmax(windows, axis=-1)[..., None]
    out = np.take_along_axis(windows, index, axis=-1)[..., 0]

    def backward_fn(g):
        routed = np.zeros(windows.shape, dtype=g.dtype)
        np.put_along_axis(routed, index, g[..., None], axis=-1)
        routed = routed.reshape(lead + (h // stride, w // stride, stride, stride))
        return (np.moveaxis(routed, -2, -3).reshape(shape),)

    return result(out, (x,), 'maxpool_spatial', backward_fn)


def interpolation_matrix(n_in: int, n_out: int, dtype=np.float64) -> np.ndarray:
    """
    Linear interpolation weights for the half-pixel-centres convention
    (align_corners=False): output index i samples the input at
    (i + 0.5) * n_in / n_out - 0.5, clamped to the valid range

    :param n_in: input length
    :param n_out: output length

    :return: [n_out, n_in] matrix
    """

    matrix = np.zeros((n_out, n_in), dtype=dtype)
    source = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    source = np.clip(source, 0, n_in - 1)
    lower = np.floor(source).astype(np.int64)
    upper = np.minimum(lower + 1, n_in - 1)
    frac = source - lower
    rows = np.arange(n_out)
    np.add.at(matrix, (rows, lower), 1 - frac)
    np.add.at(matrix, (rows, upper), frac)
    return matrix


def resize_bilinear(x: Tensor, scale: int = 2, size: Optional[tuple[int, int]] = None) -> Tensor:
    """
    Bilinear resize of the two trailing axes (align_corners=False)

    :param x: [..., H, W]
    :param scale: integer upsampling factor, ignored when size is given
    :param size: explicit output (H', W')

    :return: [..., H', W']
    """

    h, w = x.shape[-2:]
    out_h, out_w = size if size is not None else (h * scale, w * scale)
    a_h = interpolation_matrix(h, out_h, x.dtype)
    a_w = interpolation_matrix(w, out_w, x.dtype)
    out = a_h @ x.data @ a_w.T
    return result(out, (x,), 'resize_bilinear', lambda g: (a_h.T @ g @ a_w,))


def _corners(coords: np.ndarray, h: int, w: int):
    x_raw, y_raw = coords[..., 0], coords[..., 1]
    xc = np.clip(x_raw, 0, w - 1)
    yc = np.clip(y_raw, 0, h - 1)
    x0 = np.clip(np.floor(xc).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(yc).astype(np.int64), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    inside_x = (x_raw >= 0) & (x_raw <= w - 1)
    inside_y = (y_raw >= 0) & (y_raw <= h - 1)
    return x0, x1, y0, y1, xc - x0, yc - y0, inside_x, inside_y


def grid_sample_bilinear(image: Tensor, coords: Tensor) -> Tensor:
    """
    Samples image at absolute pixel coordinates with bilinear weights.
    Coordinates outside the image are clamped to the border. Channel 0 of
    coords is the column (x) and channel 1 the row (y).

    :param image: [C, H, W] or [B, C, H, W]
    :param coords: [H', W', 2] or [B, H', W', 2]

    :return: [C, H', W'] or [B, C, H', W']
    """

    batched = image.ndim == 4
    if image.ndim not in (3, 4) or coords.ndim != image.ndim or coords.shape[-1] != 2:
        raise DimensionError(f"grid_sample_bilinear: image {image.shape} and coords {coords.shape} are incompatible")
    if batched and image.shape[0] != coords.shape[0]:
        raise DimensionError(f"grid_sample_bilinear: batch sizes {image.shape[0]} and {coords.shape[0]} differ")

    img = image.data if batched else image.data[None]
    crd = coords.data if batched else coords.data[None]
    b, c, h, w = img.shape
    x0, x1, y0, y1, lx, ly, inside_x, inside_y = _corners(crd, h, w)
    lx = lx.astype(img.dtype)[..., None]
    ly = ly.astype(img.dtype)[..., None]
    batch = np.arange(b).reshape(b, 1, 1)

    # [B, H', W', C] gathers
    v00 = img[batch, :, y0, x0]
    v01 = img[batch, :, y0, x1]
    v10 = img[batch, :, y1, x0]
    v11 = img[batch, :, y1, x1]
    weights = ((1 - ly) * (1 - lx), (1 - ly) * lx, ly * (1 - lx), ly * lx)
    sampled = weights[0] * v00 + weights[1] * v01 + weights[2] * v10 + weights[3] * v11
    out = np.moveaxis(sampled, -1, 1)
    if not batched:
        out = out[0]

    def backward_fn(g):
        g = g if batched else g[None]
        g_last = np.moveaxis(g, 1, -1)

        grad_img = np.zeros((c, b * h * w), dtype=img.dtype)
        for weight, yi, xi in zip(weights, (y0, y0, y1, y1), (x0, x1, x0, x1)):
            flat = ((batch * h + yi) * w + xi).ravel()
            contribution = (weight * g_last).reshape(-1, c)
            for channel in range(c):
                grad_img[channel] += np.bincount(flat, weights=contribution[:, channel], minlength=b * h * w)
        grad_img = np.moveaxis(grad_img.reshape(c, b, h, w), 0, 1)

        d_dx = ((1 - ly) * (v01 - v00) + ly * (v11 - v10)) * g_last
        d_dy = ((1 - lx) * (v10 - v00) + lx * (v11 - v01)) * g_last
        grad_coords = np.stack([np.where(inside_x, d_dx.sum(axis=-1), 0),
                                np.where(inside_y, d_dy.sum(axis=-1), 0)], axis=-1).astype(crd.dtype)

        if not batched:
            return grad_img[0], grad_coords[0]
        return grad_img, grad_coords

    return result(out, (image, coords), 'grid_sample_bilinear', backward_fn)

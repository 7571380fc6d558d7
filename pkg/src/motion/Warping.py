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

import numpy as np

from Decorators import timeit
from Exceptions import DimensionError
from motion.Flow import FlowLike, flow_tensor
from motion.Quadratic import check_time
from tensor import Ops, Tensor, grid_sample_bilinear

EPSILON = 1e-12


def base_grid(height: int, width: int, dtype=np.float64) -> np.ndarray:
    """Pixel coordinates [H, W, 2], channel 0 = column, channel 1 = row"""

    cols, rows = np.meshgrid(np.arange(width, dtype=dtype), np.arange(height, dtype=dtype))
    return np.stack([cols, rows], axis=-1)


def _sample_positions(flow: Tensor) -> Tensor:
    h, w = flow.shape[-3:-1]
    grid = np.broadcast_to(base_grid(h, w, flow.dtype), flow.shape).copy()
    return flow + Tensor(grid)


def backward_warp(image: Tensor, flow: FlowLike) -> Tensor:
    """
    output(x) = image sampled bilinearly at x + flow(x), border clamped

    :param image: [C, H, W] or [B, C, H, W]
    :param flow: [H, W, 2] or [B, H, W, 2]

    :return: image-shaped tensor
    """

    flow = flow_tensor(flow)
    if image.shape[-2:] != flow.shape[-3:-1] or image.ndim != flow.ndim:
        raise DimensionError(f"backward_warp: image {image.shape} does not match flow {flow.shape}")
    return grid_sample_bilinear(image, _sample_positions(flow))


def _channels_first(flow: Tensor) -> Tensor:
    return Ops.permute(flow, (2, 0, 1) if flow.ndim == 3 else (0, 3, 1, 2))


def _channels_last(image: Tensor) -> Tensor:
    return Ops.permute(image, (1, 2, 0) if image.ndim == 3 else (0, 2, 3, 1))


@timeit(component='MR-apply')
def apply_refinement(flow: FlowLike, offsets: Tensor, residuals: Tensor) -> Tensor:
    """
    Refined flow: F sampled at (x + dx, y + dy) plus a per-pixel residual

    :param flow: [..., H, W, 2]
    :param offsets: sampling offsets, same shape
    :param residuals: additive residuals, same shape

    :return: refined flow tensor
    """

    flow = flow_tensor(flow)
    if offsets.shape != flow.shape or residuals.shape != flow.shape:
        raise DimensionError(f"apply_refinement: flow {flow.shape}, offsets {offsets.shape}, "
                             f"residuals {residuals.shape} must match")
    sampled = grid_sample_bilinear(_channels_first(flow), _sample_positions(offsets))
    return _channels_last(sampled) + residuals


def blend(warped0: Tensor, warped1: Tensor, mask: Tensor, t: float) -> Tensor:
    """
    Mask-weighted blend of two warped frames:
    [(1-t) M w0 + t (1-M) w1] / [(1-t) M + t (1-M) + eps]

    :param warped0: [C, H, W] or [B, C, H, W]
    :param warped1: same shape
    :param mask: [1, H, W] or [B, 1, H, W] (an [H, W] mask is accepted for single frames)
    :param t: time in (0, 1)

    :return:
    """

    t = check_time(t)
    if mask.ndim == 2:
        mask = Ops.reshape(mask, (1,) + mask.shape)
    if warped0.shape != warped1.shape or mask.ndim != warped0.ndim or mask.shape[-3] != 1:
        raise DimensionError(f"blend: warped frames {warped0.shape}, {warped1.shape} and mask {mask.shape}")
    mask = Ops.expand(mask, warped0.shape)
    weight0 = mask * (1 - t)
    weight1 = (1 - mask) * t
    return (weight0 * warped0 + weight1 * warped1) / (weight0 + weight1 + EPSILON)


@timeit(component='synthesis')
def synthesize_frame(frame0: Tensor, frame1: Tensor, flow_t0: FlowLike, flow_t1: FlowLike, mask: Tensor,
                     t: float) -> Tensor:
    """
    Intermediate frame from both anchors: each anchor frame is backward
    warped with its refined flow and the two warps are blended with mask M

    :param frame0: I0 [C, H, W] or [B, C, H, W]
    :param frame1: I1
    :param flow_t0: refined F_{t->0}
    :param flow_t1: refined F_{t->1}
    :param mask: blending mask in [0, 1]
    :param t: time in (0, 1)

    :return:
    """

    check_time(t)
    return blend(backward_warp(frame0, flow_t0), backward_warp(frame1, flow_t1), mask, t)

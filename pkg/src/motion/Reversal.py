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

import numpy as np

from Decorators import timeit
from motion.Flow import FlowLike, HoleMask, flow_tensor
from tensor import Ops, Tensor

CORNERS = tuple(itertools.product((0, 1), (0, 1)))


@timeit(component='BFE')
def reverse_flow(flow: FlowLike) -> tuple[Tensor, HoleMask]:
    """
    Flow reversal by Gaussian-weighted splatting. Every source pixel p
    lands at q = p + F(p) and deposits -F(p) on the four pixels x of the
    unit cell containing q with weight exp(-|x - q|^2). Each output pixel
    is the weighted sum divided by the weight sum; pixels that received no
    weight get zero flow and are flagged as holes.

    Cell membership is decided on the forward values and held fixed in
    the backward pass.

    :param flow: forward flow [..., H, W, 2] (a single FlowField or a batch)

    :return: (reversed flow with the input's shape, hole mask [..., H, W])
    """

    flow = flow_tensor(flow)
    lead = flow.shape[:-3]
    h, w = flow.shape[-3:-1]
    batch = int(np.prod(lead, dtype=np.int64))
    size = batch * h * w

    flat = Ops.reshape(flow, (batch, h, w, 2))
    fx, fy = flat[..., 0], flat[..., 1]
    cols = np.broadcast_to(np.arange(w, dtype=flow.dtype), (batch, h, w))
    rows = np.broadcast_to(np.arange(h, dtype=flow.dtype)[:, None], (batch, h, w))
    qx = fx + Tensor(cols)
    qy = fy + Tensor(rows)
    x0 = np.floor(qx.data).astype(np.int64)
    y0 = np.floor(qy.data).astype(np.int64)
    offset = (np.arange(batch, dtype=np.int64) * h * w)[:, None, None]
    neg_fx, neg_fy = -fx, -fy

    numerator_x = numerator_y = denominator = None
    for dy, dx in CORNERS:
        cx, cy = x0 + dx, y0 + dy
        valid = np.flatnonzero((cx >= 0) & (cx < w) & (cy >= 0) & (cy < h))
        target = (offset + cy * w + cx).reshape(-1)[valid]

        dist = Ops.square(qx - Tensor(cx.astype(flow.dtype))) + Ops.square(qy - Tensor(cy.astype(flow.dtype)))
        weight = Ops.reshape(Ops.exp(-dist), (-1,))[valid]

        splat_x = Ops.scatter_add(weight * Ops.reshape(neg_fx, (-1,))[valid], target, size)
        splat_y = Ops.scatter_add(weight * Ops.reshape(neg_fy, (-1,))[valid], target, size)
        splat_w = Ops.scatter_add(weight, target, size)
        if denominator is None:
            numerator_x, numerator_y, denominator = splat_x, splat_y, splat_w
        else:
            numerator_x = numerator_x + splat_x
            numerator_y = numerator_y + splat_y
            denominator = denominator + splat_w

    holes = denominator.data == 0
    safe = denominator + Tensor(holes.astype(flow.dtype))
    reversed_flow = Ops.stack([numerator_x / safe, numerator_y / safe], axis=-1)
    reversed_flow = Ops.reshape(reversed_flow, flow.shape)
    return reversed_flow, HoleMask(holes.reshape(lead + (h, w)))

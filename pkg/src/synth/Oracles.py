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

from motion.Flow import FlowField, FlowLike
from tensor import Tensor


def brute_force_reverse(flow: FlowLike) -> FlowField:
    """
    Reference flow reversal evaluated output pixel by output pixel. For
    each pixel x every source pixel p is visited; p contributes when its
    landing point q = p + F(p) lies in a unit cell having x as a corner,
    i.e. floor(q) is x or x - 1 along both axes. The result is
    sum(w * -F(p)) / sum(w) with w = exp(-|x - q|^2), zero where no
    source contributes. Quadratic in the number of pixels; tests only.

    :param flow: [H, W, 2]

    :return:
    """

    data = np.asarray(flow.data if isinstance(flow, (FlowField, Tensor)) else flow, dtype=np.float64)
    h, w = data.shape[:2]
    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    qx = (cols + data[..., 0]).reshape(-1)
    qy = (rows + data[..., 1]).reshape(-1)
    cell_x, cell_y = np.floor(qx), np.floor(qy)
    neg = -data.reshape(-1, 2)

    out = np.zeros((h, w, 2))
    for y in range(h):
        for x in range(w):
            member = ((cell_x == x) | (cell_x == x - 1)) & ((cell_y == y) | (cell_y == y - 1))
            if not np.any(member):
                continue
            weight = np.exp(-((x - qx[member]) ** 2 + (y - qy[member]) ** 2))
            total = weight.sum()
            if total > 0:
                out[y, x] = (weight[:, None] * neg[member]).sum(axis=0) / total
    return FlowField(out)

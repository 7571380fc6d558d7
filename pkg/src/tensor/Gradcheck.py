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

from typing import Callable, Sequence

import numpy as np

from tensor.Tensor import Tape, Tensor, backward
from tensor import Ops


def gradcheck(f: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-4, seed: int = 0) -> float:
    """
    Compares the tape gradient of f against central finite differences,
    coordinate by coordinate, in double precision. A non-scalar output is
    reduced with a fixed random projection first.

    :param f: function of the input tensors
    :param inputs: evaluation point (copied to float64)
    :param eps: finite difference step
    :param seed: seed of the output projection

    :return: max over coordinates of |a - n| / max(|a|, |n|, 1e-8)
    """

    points = [Tensor(np.array(t.data, dtype=np.float64), requires_grad=True) for t in inputs]

    with Tape() as tape:
        out = f(*points)
        projection = np.random.default_rng(seed).standard_normal(out.shape)
        loss = Ops.sum(Ops.mul(out, Tensor(projection)))
    backward(tape, loss)

    worst = 0.0
    for point in points:
        analytic = point.grad if point.grad is not None else np.zeros_like(point.data)
        flat = point.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = f(*points).data
            flat[i] = original - eps
            minus = f(*points).data
            flat[i] = original
            # differencing outputs first keeps untouched elements exactly zero
            numeric = float(np.sum((plus - minus) * projection) / (2 * eps))
            exact = float(analytic.reshape(-1)[i])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            worst = max(worst, error)
    return worst

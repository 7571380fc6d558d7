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

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from Exceptions import DimensionError
from tensor.Tensor import Tensor


@dataclass
class AdamState:
    """
    First and second moment accumulators keyed by parameter name, plus the
    number of updates applied so far
    """

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: Mapping[str, Tensor], state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8,
              grads: Optional[Mapping[str, np.ndarray]] = None) -> AdamState:
    """
    One bias-corrected Adam update applied in place to every parameter.
    A parameter without gradient is updated as if its gradient were zero.

    :param params: named parameters
    :param state: moment accumulators, updated in place
    :param lr: learning rate
    :param beta1: first moment decay
    :param beta2: second moment decay
    :param eps: denominator offset
    :param grads: explicit gradients, defaults to each parameter's grad

    :return: the updated state
    """

    state.step += 1
    correction1 = 1 - beta1 ** state.step
    correction2 = 1 - beta2 ** state.step

    for name, param in params.items():
        grad = grads.get(name) if grads is not None else param.grad
        if grad is None:
            grad = np.zeros_like(param.data)
        if grad.shape != param.shape:
            raise DimensionError(f"gradient of {name} has shape {grad.shape}, parameter {param.shape}")

        m = state.m.get(name, np.zeros_like(param.data))
        v = state.v.get(name, np.zeros_like(param.data))
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        state.m[name] = m.astype(param.dtype, copy=False)
        state.v[name] = v.astype(param.dtype, copy=False)

        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        param.data = (param.data - update).astype(param.dtype, copy=False)

    return state

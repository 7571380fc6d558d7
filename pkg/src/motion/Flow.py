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

from dataclasses import dataclass
from typing import Union

import numpy as np

from Exceptions import ContractError, DimensionError
from tensor import Tensor


@dataclass
class FlowField:
    """
    Per-pixel displacement in pixels, [H, W, 2] with channel 0 = dx
    (columns) and channel 1 = dy (rows). A pixel at x in the source frame
    lands at x + F(x) in the target frame.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        if self.data.ndim != 3 or self.data.shape[-1] != 2:
            raise DimensionError(f"flow field must be H x W x 2, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ContractError("flow field contains non-finite values")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def zeros(cls, height: int, width: int, dtype=np.float64) -> FlowField:
        return cls(np.zeros((height, width, 2), dtype=dtype))

    @classmethod
    def from_tensor(cls, tensor: Tensor) -> FlowField:
        return cls(np.array(tensor.data))

    def as_tensor(self, requires_grad: bool = False, dtype=None) -> Tensor:
        return Tensor(self.data if dtype is None else self.data.astype(dtype), requires_grad=requires_grad)


@dataclass
class OcclusionMap:
    """
    Per-pixel occlusion in [0, 1]; 1 means the source pixel has no
    correspondence in the target frame. Values are clamped on construction.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DimensionError(f"occlusion map must be H x W, got {data.shape}")
        self.data = np.clip(data, 0, 1)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def zeros(cls, height: int, width: int, dtype=np.float64) -> OcclusionMap:
        return cls(np.zeros((height, width), dtype=dtype))


@dataclass
class HoleMask:
    """True where flow reversal received zero total splat weight"""

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=bool)

    @property
    def count(self) -> int:
        return int(self.data.sum())


@dataclass
class MotionCoeffs:
    """
    Quadratic motion coefficients for both anchor frames. Every map is a
    [..., H, W, 2] tensor: alpha in pixels per unit t, beta in pixels per
    unit t squared.
    """

    alpha0: Tensor
    beta0: Tensor
    alpha1: Tensor
    beta1: Tensor

    def __post_init__(self) -> None:
        shapes = {m.shape for m in self.maps()}
        if len(shapes) != 1:
            raise DimensionError(f"coefficient maps must share one shape, got {sorted(shapes)}")
        shape = shapes.pop()
        if len(shape) < 3 or shape[-1] != 2:
            raise DimensionError(f"coefficient maps must be [..., H, W, 2], got {shape}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.alpha0.shape

    def maps(self) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        return self.alpha0, self.beta0, self.alpha1, self.beta1

    def anchor(self, index: int) -> tuple[Tensor, Tensor]:
        if index == 0:
            return self.alpha0, self.beta0
        if index == 1:
            return self.alpha1, self.beta1
        raise ContractError(f"anchor must be 0 or 1, got {index}")

    def astype(self, dtype) -> MotionCoeffs:
        return MotionCoeffs(*(Tensor(m.data.astype(dtype)) for m in self.maps()))

    def max_abs_diff(self, other: MotionCoeffs) -> float:
        return max(float(np.max(np.abs(a.data - b.data))) for a, b in zip(self.maps(), other.maps()))


FlowLike = Union[FlowField, Tensor, np.ndarray]


def flow_tensor(flow: FlowLike) -> Tensor:
    """Tensor view of any flow representation ([..., H, W, 2])"""

    if isinstance(flow, Tensor):
        tensor = flow
    elif isinstance(flow, FlowField):
        tensor = flow.as_tensor()
    else:
        tensor = Tensor(np.asarray(flow))
    if tensor.ndim < 3 or tensor.shape[-1] != 2:
        raise DimensionError(f"flow must be [..., H, W, 2], got {tensor.shape}")
    return tensor

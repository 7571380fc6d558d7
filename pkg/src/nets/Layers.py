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

from typing import Iterator, Sequence, Union

import numpy as np

from Exceptions import DimensionError
from tensor import Tensor, conv2d, conv3d


class Module:
    """
    Base class of the learnable components. Parameters are the Tensor
    attributes created with requires_grad; sub-modules are Module
    attributes or lists of them. Names are dotted attribute paths in
    declaration order, which is also the checkpoint order.
    """

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = '') -> Iterator[tuple[str, Tensor]]:
        for attr, value in vars(self).items():
            name = f'{prefix}{attr}'
            if isinstance(value, Tensor) and value.requires_grad:
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f'{name}.')
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f'{name}.{i}.')

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def zero_grad(self) -> None:
        for param in self.parameters().values():
            param.zero_grad()

    def fill(self, value: float) -> None:
        for param in self.parameters().values():
            param.data[...] = value

    def astype(self, dtype) -> Module:
        for param in self.parameters().values():
            param.data = param.data.astype(dtype)
        return self

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(values)
        if missing:
            raise DimensionError(f"missing parameters: {sorted(missing)[:5]}")
        for name, param in params.items():
            if values[name].shape != param.shape:
                raise DimensionError(f"parameter {name} has shape {values[name].shape}, expected {param.shape}")
            param.data = np.array(values[name], dtype=param.dtype)


def param_count(net: Module) -> int:
    """Exact number of learnable scalars"""

    return int(sum(param.size for param in net.parameters().values()))


class ConvNd(Module):
    """
    Convolution layer with He (fan-in) initialised weights and zero bias.
    The default padding keeps the spatial size for odd kernels.

    Object attributes:
    weight -> [out, in, *kernel]
    bias -> [out]
    padding -> per-axis zero padding
    """

    def __init__(self, in_channels: int, out_channels: int, kernel: Sequence[int], rng: np.random.Generator,
                 padding: Union[None, Sequence[int]] = None, gain: float = 1.0, dtype=np.float32) -> None:
        kernel = tuple(kernel)
        fan_in = in_channels * int(np.prod(kernel))
        std = gain * np.sqrt(2.0 / fan_in)
        self.weight = Tensor(rng.normal(0.0, std, (out_channels, in_channels) + kernel).astype(dtype),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)
        self.padding = tuple(k // 2 for k in kernel) if padding is None else tuple(padding)

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]


class Conv2d(ConvNd):

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, kernel: Sequence[int] = (3, 3),
                 **kwargs) -> None:
        super().__init__(in_channels, out_channels, kernel, rng, **kwargs)

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, padding=self.padding)


class Conv3d(ConvNd):

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 kernel: Sequence[int] = (3, 3, 3), **kwargs) -> None:
        super().__init__(in_channels, out_channels, kernel, rng, **kwargs)

    def forward(self, x: Tensor) -> Tensor:
        return conv3d(x, self.weight, self.bias, padding=self.padding)

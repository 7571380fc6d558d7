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

from typing import Mapping, Sequence

import numpy as np

from Decorators import timeit
from Exceptions import DimensionError
from motion.Flow import FlowLike, MotionCoeffs, OcclusionMap
from nets.Layers import Conv2d, Conv3d, ConvNd, Module
from tensor import Ops, Tensor, maxpool_spatial, resize_bilinear

SLOPE = 0.1
ROWS = 3
COLUMNS = 6
PAIRS = ((-1, 0), (0, 1), (1, 2))


def _conv(dims: int, in_channels: int, out_channels: int, rng: np.random.Generator, **kwargs) -> ConvNd:
    return (Conv3d if dims == 3 else Conv2d)(in_channels, out_channels, rng, **kwargs)


class LateralBlock(Module):
    """x + conv_b(lrelu(conv_a(lrelu(x))))"""

    def __init__(self, dims: int, channels: int, rng: np.random.Generator, dtype) -> None:
        self.conv_a = _conv(dims, channels, channels, rng, dtype=dtype)
        self.conv_b = _conv(dims, channels, channels, rng, gain=0.1, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return x + self.conv_b(Ops.leaky_relu(self.conv_a(Ops.leaky_relu(x, SLOPE)), SLOPE))


class DownBlock(Module):
    """Spatial max pooling (stride 2) followed by one convolution"""

    def __init__(self, dims: int, in_channels: int, out_channels: int, rng: np.random.Generator, dtype) -> None:
        self.conv = _conv(dims, in_channels, out_channels, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return Ops.leaky_relu(self.conv(maxpool_spatial(x)), SLOPE)


class UpBlock(Module):
    """Spatial bilinear upsampling (x2) followed by two convolutions"""

    def __init__(self, dims: int, in_channels: int, out_channels: int, rng: np.random.Generator, dtype) -> None:
        self.conv_a = _conv(dims, in_channels, out_channels, rng, dtype=dtype)
        self.conv_b = _conv(dims, out_channels, out_channels, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        x = Ops.leaky_relu(self.conv_a(resize_bilinear(x, 2)), SLOPE)
        return Ops.leaky_relu(self.conv_b(x), SLOPE)


class GridNet(Module):
    """
    Three parallel resolution streams over six columns. Every stream
    carries five residual lateral blocks; the first three columns feed
    each stream into the next coarser one through down blocks, the last
    three feed it back through up blocks. Nodes sum their incoming edges.

    Object attributes:
    dims -> 2 or 3 (convolution dimensionality)
    widths -> channel width of each stream, finest first
    head -> input convolution into the finest stream
    lateral -> lateral[row][column] residual blocks
    down -> down[row][column] blocks from row to row + 1 (columns 0-2)
    up -> up[row][column] blocks from row + 1 to row (columns 3-5)
    """

    def __init__(self, dims: int, in_channels: int, widths: Sequence[int], seed: int, dtype=np.float32) -> None:
        if len(widths) != ROWS:
            raise DimensionError(f"grid network needs {ROWS} stream widths, got {list(widths)}")
        rng = np.random.default_rng(seed)
        self.dims = dims
        self.widths = tuple(int(w) for w in widths)
        self.head = _conv(dims, in_channels, self.widths[0], rng, dtype=dtype)
        self.lateral = [[LateralBlock(dims, w, rng, dtype) for _ in range(COLUMNS - 1)] for w in self.widths]
        half = COLUMNS // 2
        self.down = [[DownBlock(dims, self.widths[r], self.widths[r + 1], rng, dtype) for _ in range(half)]
                     for r in range(ROWS - 1)]
        self.up = [[UpBlock(dims, self.widths[r + 1], self.widths[r], rng, dtype) for _ in range(half)]
                   for r in range(ROWS - 1)]

    def named_parameters(self, prefix: str = ''):
        yield from self.head.named_parameters(f'{prefix}head.')
        for r, row in enumerate(self.lateral):
            for c, block in enumerate(row):
                yield from block.named_parameters(f'{prefix}lateral.{r}.{c}.')
        for kind, blocks in (('down', self.down), ('up', self.up)):
            for r, row in enumerate(blocks):
                for c, block in enumerate(row):
                    yield from block.named_parameters(f'{prefix}{kind}.{r}.{c}.')
        yield from self._head_parameters(prefix)

    def _head_parameters(self, prefix: str):
        return iter(())

    def check_input(self, x: Tensor) -> None:
        h, w = x.shape[-2:]
        if h % 4 or w % 4:
            raise DimensionError(f"spatial size {h}x{w} must be divisible by 4")

    def grid(self, x: Tensor) -> Tensor:
        half = COLUMNS // 2
        nodes = [[None] * COLUMNS for _ in range(ROWS)]
        nodes[0][0] = Ops.leaky_relu(self.head(x), SLOPE)

        for c in range(half):
            for r in range(ROWS):
                node = nodes[r][c] if c == 0 else self.lateral[r][c - 1](nodes[r][c - 1])
                if r > 0:
                    down = self.down[r - 1][c](nodes[r - 1][c])
                    node = down if node is None else node + down
                nodes[r][c] = node

        for c in range(half, COLUMNS):
            for r in reversed(range(ROWS)):
                node = self.lateral[r][c - 1](nodes[r][c - 1])
                if r < ROWS - 1:
                    node = node + self.up[r][c - half](nodes[r + 1][c])
                nodes[r][c] = node

        return nodes[0][COLUMNS - 1]


class GridNet3D(GridNet):
    """
    Non-linear motion estimator. Input [B, 6, 3, H, W] (one temporal slot
    per consecutive frame pair), output coefficient maps for both anchor
    frames. The output convolution spans two temporal steps without
    temporal padding and so collapses the three slots into two.
    """

    def __init__(self, widths: Sequence[int] = (16, 32, 64), seed: int = 0, dtype=np.float32) -> None:
        super().__init__(3, 6, widths, seed, dtype)
        rng = np.random.default_rng(seed + 1)
        self.out = Conv3d(self.widths[0], 4, rng, kernel=(2, 3, 3), padding=(0, 1, 1), gain=0.1, dtype=dtype)

    def _head_parameters(self, prefix: str):
        return self.out.named_parameters(f'{prefix}out.')

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 5 or x.shape[1] != 6 or x.shape[2] != 3:
            raise DimensionError(f"GridNet3D expects [B, 6, 3, H, W], got {x.shape}")
        self.check_input(x)
        return self.out(Ops.leaky_relu(self.grid(x), SLOPE))


class GridNet2D_MR(GridNet):
    """
    Motion refinement network. Input: I0, I1, both warped frames and both
    backward flows stacked on the channel axis (16 channels). Output: 8
    channels (dx, dy, rx, ry for F_t0 then for F_t1) and the finest
    stream's final feature map, which the blending head consumes.
    """

    IN_CHANNELS = 16
    OUT_CHANNELS = 8

    def __init__(self, widths: Sequence[int] = (32, 64, 96), seed: int = 1, dtype=np.float32) -> None:
        super().__init__(2, self.IN_CHANNELS, widths, seed, dtype)
        rng = np.random.default_rng(seed + 1)
        self.out = Conv2d(self.widths[0], self.OUT_CHANNELS, rng, gain=0.1, dtype=dtype)

    def _head_parameters(self, prefix: str):
        return self.out.named_parameters(f'{prefix}out.')

    @property
    def feature_channels(self) -> int:
        return self.widths[0]

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        if x.ndim != 4 or x.shape[1] != self.IN_CHANNELS:
            raise DimensionError(f"GridNet2D_MR expects [B, {self.IN_CHANNELS}, H, W], got {x.shape}")
        self.check_input(x)
        features = self.grid(x)
        return self.out(Ops.leaky_relu(features, SLOPE)), features


class BMEHead(Module):
    """Three convolutions and a sigmoid producing the blending mask"""

    def __init__(self, feature_channels: int = 32, widths: Sequence[int] = (32, 16), seed: int = 2,
                 dtype=np.float32) -> None:
        rng = np.random.default_rng(seed)
        self.conv1 = Conv2d(6 + feature_channels, widths[0], rng, dtype=dtype)
        self.conv2 = Conv2d(widths[0], widths[1], rng, dtype=dtype)
        self.conv3 = Conv2d(widths[1], 1, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        x = Ops.leaky_relu(self.conv1(x), SLOPE)
        x = Ops.leaky_relu(self.conv2(x), SLOPE)
        return Ops.sigmoid(self.conv3(x))


def _channels_first(flow: Tensor) -> Tensor:
    return Ops.permute(flow, (0, 3, 1, 2))


def _channels_last(x: Tensor) -> Tensor:
    return Ops.permute(x, (0, 2, 3, 1))


def nme_pack_input(flows: Mapping[tuple[int, int], FlowLike], occlusions: Mapping[tuple[int, int], OcclusionMap],
                   dtype=np.float32) -> Tensor:
    """
    Arranges the six flows and occlusion maps of a quad in temporal order.
    Slot k holds pair (a, b) = (-1, 0), (0, 1), (1, 2) with channels
    F_{a->b} (2), F_{b->a} (2), O_{a->b} (1), O_{b->a} (1).

    :param flows: flow fields keyed by (from, to)
    :param occlusions: occlusion maps keyed by (from, to)
    :param dtype: element type of the packed tensor

    :return: [1, 6, 3, H, W]
    """

    slots = []
    shapes = set()
    for a, b in PAIRS:
        forward, backward = _flow_array(flows[(a, b)]), _flow_array(flows[(b, a)])
        occ_f, occ_b = np.asarray(occlusions[(a, b)].data), np.asarray(occlusions[(b, a)].data)
        shapes.update({forward.shape[:2], backward.shape[:2], occ_f.shape, occ_b.shape})
        if len(shapes) != 1:
            raise DimensionError(f"flows and occlusion maps have inconsistent spatial shapes {sorted(shapes)}")
        slots.append(np.concatenate([np.moveaxis(forward, -1, 0), np.moveaxis(backward, -1, 0),
                                     occ_f[None], occ_b[None]], axis=0))
    return Tensor(np.stack(slots, axis=1)[None].astype(dtype))


def _flow_array(flow: FlowLike) -> np.ndarray:
    return np.asarray(flow if isinstance(flow, np.ndarray) else flow.data)


def pack_batch(samples: Sequence[Tensor]) -> Tensor:
    return Tensor(np.concatenate([s.data for s in samples], axis=0))


def coeffs_from_output(out: Tensor) -> MotionCoeffs:
    """
    Splits the [B, 4, 2, H, W] estimator output: channels 0-1 alpha, 2-3
    beta; temporal slice 0 is anchor 0, slice 1 anchor 1

    :param out: estimator output

    :return: coefficient maps [B, H, W, 2]
    """

    return MotionCoeffs(alpha0=_channels_last(out[:, 0:2, 0]), beta0=_channels_last(out[:, 2:4, 0]),
                        alpha1=_channels_last(out[:, 0:2, 1]), beta1=_channels_last(out[:, 2:4, 1]))


@timeit(component='NME')
def gridnet3d_forward(net: GridNet3D, x: Tensor) -> MotionCoeffs:
    return coeffs_from_output(net(x))


@timeit(component='MR')
def mr_forward(net: GridNet2D_MR, frame0: Tensor, frame1: Tensor, warped0: Tensor, warped1: Tensor,
               flow_t0: Tensor, flow_t1: Tensor) -> tuple[Tensor, Tensor, Tensor, Tensor, Tensor]:
    """
    Refinement offsets and residuals for both backward flows

    :param net: refinement network
    :param frame0: I0 [B, 3, H, W]
    :param frame1: I1 [B, 3, H, W]
    :param warped0: I0 warped to t
    :param warped1: I1 warped to t
    :param flow_t0: F_{t->0} [B, H, W, 2]
    :param flow_t1: F_{t->1} [B, H, W, 2]

    :return: (offsets0, residuals0, offsets1, residuals1) as [B, H, W, 2] and the feature map
    """

    x = Ops.concat([frame0, frame1, warped0, warped1, _channels_first(flow_t0), _channels_first(flow_t1)], axis=1)
    out, features = net(x)
    parts = tuple(_channels_last(out[:, i:i + 2]) for i in range(0, 8, 2))
    return parts + (features,)


@timeit(component='BME')
def bme_forward(head: BMEHead, warped0: Tensor, warped1: Tensor, features: Tensor) -> Tensor:
    """Blending mask [B, 1, H, W] in (0, 1)"""

    return head(Ops.concat([warped0, warped1, features], axis=1))

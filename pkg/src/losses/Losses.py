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

from dataclasses import dataclass, fields, replace
from typing import Mapping, Union

import numpy as np

from Exceptions import ContractError, DimensionError
from motion.Warping import backward_warp
from tensor import Ops, Tensor, as_tensor, conv2d

PHASES = ('early', 'late')


@dataclass
class LossWeights:
    """
    Coefficients of the training objective. The late phase turns off the
    warping and smoothness terms whatever values were given.
    """

    lambda_r: float = 204.0
    lambda_p: float = 0.005
    lambda_w: float = 102.0
    lambda_s: float = 1.0
    phase: str = 'early'

    def __post_init__(self) -> None:
        if self.phase not in PHASES:
            raise ContractError(f"phase must be one of {PHASES}, got {self.phase!r}")
        for f in fields(self):
            if f.name.startswith('lambda_') and getattr(self, f.name) < 0:
                raise ContractError(f"{f.name} must be nonnegative, got {getattr(self, f.name)}")
        if self.phase == 'late':
            self.lambda_w = 0.0
            self.lambda_s = 0.0

    def at_step(self, step: int, late_phase_step: int) -> LossWeights:
        """Weights in force at a (1-based) training step"""

        if late_phase_step > 0 and step >= late_phase_step:
            return replace(self, phase='late')
        return self


@dataclass
class LossParts:
    reconstruction: Tensor
    perceptual: Tensor
    warping: Tensor
    smoothness: Tensor

    def as_floats(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name).item()) for f in fields(self)}


class FeatureExtractor:
    """
    Fixed feature stack standing in for a pretrained perceptual network:
    three stride-2 convolutions (3 -> 16 -> 32 -> 64) with leaky-relu,
    seeded weights that never require gradients. Differentiable with
    respect to its input.
    """

    WIDTHS = (3, 16, 32, 64)

    def __init__(self, seed: int = 7, dtype=np.float32) -> None:
        rng = np.random.default_rng(seed)
        self.layers = []
        for c_in, c_out in zip(self.WIDTHS[:-1], self.WIDTHS[1:]):
            std = np.sqrt(2.0 / (c_in * 9))
            weight = Tensor(rng.normal(0.0, std, (c_out, c_in, 3, 3)).astype(dtype))
            bias = Tensor(np.zeros(c_out, dtype=dtype))
            self.layers.append((weight, bias))

    def astype(self, dtype) -> FeatureExtractor:
        self.layers = [(Tensor(w.data.astype(dtype)), Tensor(b.data.astype(dtype))) for w, b in self.layers]
        return self

    def __call__(self, image: Tensor) -> Tensor:
        x = image if image.ndim == 4 else Ops.reshape(image, (1,) + image.shape)
        for weight, bias in self.layers:
            x = Ops.leaky_relu(conv2d(x, weight, bias, stride=2, padding=1), 0.1)
        return x


def _check_pair(name: str, pred: Tensor, gt: Tensor) -> None:
    if pred.shape != gt.shape:
        raise DimensionError(f"{name}: prediction {pred.shape} and target {gt.shape} differ")


def reconstruction_loss(pred: Tensor, gt: Tensor) -> Tensor:
    """Mean absolute error"""

    _check_pair('reconstruction_loss', pred, gt)
    return Ops.mean(Ops.absolute(pred - gt))


def perceptual_loss(pred: Tensor, gt: Tensor, phi: FeatureExtractor) -> Tensor:
    """Root mean squared difference of the extracted features"""

    _check_pair('perceptual_loss', pred, gt)
    return Ops.sqrt(Ops.mean(Ops.square(phi(pred) - phi(gt))))


def warping_loss(frame_t: Tensor, frame0: Tensor, frame1: Tensor, flow_t0: Tensor, flow_t1: Tensor) -> Tensor:
    """Mean absolute error of each anchor frame warped to t against the target"""

    return (reconstruction_loss(backward_warp(frame0, flow_t0), frame_t)
            + reconstruction_loss(backward_warp(frame1, flow_t1), frame_t))


def _total_variation(flow: Tensor) -> Tensor:
    h, w = flow.shape[-3:-1]
    if h < 2 or w < 2:
        raise DimensionError(f"smoothness needs flows of at least 2x2, got {h}x{w}")
    dx = flow[..., :, 1:, :] - flow[..., :, :w - 1, :]
    dy = flow[..., 1:, :, :] - flow[..., :h - 1, :, :]
    return Ops.mean(Ops.absolute(dx)) + Ops.mean(Ops.absolute(dy))


def smoothness_loss(flow_t0: Tensor, flow_t1: Tensor) -> Tensor:
    """
    Anisotropic total variation of both flows: mean absolute forward
    difference along x plus along y, averaged over both channels
    """

    return _total_variation(flow_t0) + _total_variation(flow_t1)


def total_loss(parts: Union[LossParts, Mapping[str, Union[Tensor, float]]], weights: LossWeights) -> Tensor:
    """
    lambda_r * Lr + lambda_p * Lp + lambda_w * Lw + lambda_s * Ls.
    Terms with zero weight are skipped entirely.

    :param parts: loss values keyed reconstruction, perceptual, warping, smoothness
    :param weights: coefficients

    :return: scalar tensor
    """

    if isinstance(parts, LossParts):
        parts = {f.name: getattr(parts, f.name) for f in fields(parts)}
    terms = (('reconstruction', weights.lambda_r), ('perceptual', weights.lambda_p),
             ('warping', weights.lambda_w), ('smoothness', weights.lambda_s))

    total = None
    for key, weight in terms:
        if weight == 0:
            continue
        term = as_tensor(parts[key]) * float(weight)
        total = term if total is None else total + term
    return total if total is not None else Tensor(np.zeros(()))


def compute_losses(pred: Tensor, gt: Tensor, frame0: Tensor, frame1: Tensor, flow_t0: Tensor, flow_t1: Tensor,
                   phi: FeatureExtractor, weights: LossWeights) -> LossParts:
    """
    All four loss terms of one prediction. Terms switched off by the
    weights are filled with zeros and not recorded.
    """

    zero = Tensor(np.zeros((), dtype=pred.dtype))
    return LossParts(
        reconstruction=reconstruction_loss(pred, gt),
        perceptual=perceptual_loss(pred, gt, phi) if weights.lambda_p else zero,
        warping=warping_loss(gt, frame0, frame1, flow_t0, flow_t1) if weights.lambda_w else zero,
        smoothness=smoothness_loss(flow_t0, flow_t1) if weights.lambda_s else zero,
    )

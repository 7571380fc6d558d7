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

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from Decorators import component_runtimes
from Exceptions import ContractError, DimensionError
from Logger import get_logger
from motion.Flow import HoleMask, MotionCoeffs
from motion.Quadratic import analytic_coeffs, check_time, eval_quadratic_flow
from motion.Reversal import reverse_flow
from motion.Warping import apply_refinement, backward_warp, synthesize_frame
from nets.GridNet import (BMEHead, GridNet2D_MR, GridNet3D, bme_forward, gridnet3d_forward, mr_forward,
                          nme_pack_input)
from nets.Layers import Module, param_count
from pipeline.Config import PipelineConfig
from pipeline.Serialization import Checkpoint
from synth.Dataset import Quad
from synth.Scene import SceneSpec, visible_coeffs
from tensor import Tensor
from utility_functions.Utilities import reflect_pad

logger = get_logger('pipeline')


@dataclass
class QuadBatch:
    """
    Quads sharing one target time stacked along a leading batch axis.
    Frames are [B, 3, H, W]; flows [B, H, W, 2] keyed by (from, to).
    """

    frame0: np.ndarray
    frame1: np.ndarray
    gt_frame: Optional[np.ndarray]
    flows: dict[tuple[int, int], np.ndarray]
    packed: np.ndarray
    scenes: Optional[tuple[SceneSpec, ...]]
    t: float

    @classmethod
    def from_quads(cls, quads: Sequence[Quad], dtype=np.float32) -> QuadBatch:
        if not quads:
            raise ContractError("cannot batch an empty list of quads")
        t = quads[0].t
        if any(q.t != t for q in quads):
            raise ContractError("quads of one batch must share the target time")
        shapes = {(q.height, q.width) for q in quads}
        if len(shapes) != 1:
            raise DimensionError(f"quads of one batch must share the canvas size, got {sorted(shapes)}")

        gt_frame = None
        if all(q.gt_frame is not None for q in quads):
            gt_frame = np.stack([q.gt_frame for q in quads]).astype(dtype)
        scenes = tuple(q.scene for q in quads) if all(q.scene is not None for q in quads) else None
        return cls(frame0=np.stack([q.frames[0] for q in quads]).astype(dtype),
                   frame1=np.stack([q.frames[1] for q in quads]).astype(dtype),
                   gt_frame=gt_frame,
                   flows={k: np.stack([q.flows[k].data for q in quads]) for k in quads[0].flows},
                   packed=np.concatenate([nme_pack_input(q.flows, q.occlusions, dtype).data for q in quads]),
                   scenes=scenes, t=t)

    @property
    def size(self) -> int:
        return self.frame0.shape[0]


@dataclass
class Diagnostics:
    """
    Intermediate results of one interpolation: forward intermediate flows
    (F_0t, F_1t), reversed flows (F_t0, F_t1), refined flows, blending
    mask, reversal holes and the motion coefficients. Flows are
    [B, H, W, 2], the mask [B, 1, H, W].
    """

    flow_0t: Tensor
    flow_1t: Tensor
    flow_t0: Tensor
    flow_t1: Tensor
    refined_t0: Tensor
    refined_t1: Tensor
    mask: Tensor
    holes: tuple[HoleMask, HoleMask]
    coeffs: MotionCoeffs

    def crop(self, height: int, width: int) -> Diagnostics:
        def flow(x: Tensor) -> Tensor:
            return Tensor(x.data[..., :height, :width, :])

        return Diagnostics(*(flow(f) for f in (self.flow_0t, self.flow_1t, self.flow_t0, self.flow_t1,
                                                self.refined_t0, self.refined_t1)),
                           mask=Tensor(self.mask.data[..., :height, :width]),
                           holes=tuple(HoleMask(h.data[..., :height, :width]) for h in self.holes),
                           coeffs=MotionCoeffs(*(flow(m) for m in self.coeffs.maps())))

    def item(self, index: int) -> Diagnostics:
        """Diagnostics of one batch element, without the batch axis"""

        def pick(x: Tensor) -> Tensor:
            return Tensor(x.data[index])

        return Diagnostics(*(pick(f) for f in (self.flow_0t, self.flow_1t, self.flow_t0, self.flow_t1,
                                                self.refined_t0, self.refined_t1, self.mask)),
                           holes=tuple(HoleMask(h.data[index]) for h in self.holes),
                           coeffs=MotionCoeffs(*(pick(m) for m in self.coeffs.maps())))


class Pipeline:
    """
    Interpolation pipeline: motion coefficients (learned, analytic or
    oracle), quadratic forward flows, flow reversal, refinement, blending
    mask and synthesis. Refinement and mask estimation only run in the
    learned mode; the other modes use identity refinement and M = 0.5.

    Object attributes:
    config -> settings
    nme -> motion estimator GridNet3D
    mr -> refinement GridNet2D_MR
    bme -> blending mask head
    """

    def __init__(self, config: PipelineConfig, nme: Optional[GridNet3D] = None, mr: Optional[GridNet2D_MR] = None,
                 bme: Optional[BMEHead] = None) -> None:
        self.config = config
        dtype = config.dtype
        self.nme = nme or GridNet3D(config.nme_widths, seed=config.seed, dtype=dtype)
        self.mr = mr or GridNet2D_MR(config.mr_widths, seed=config.seed + 2, dtype=dtype)
        self.bme = bme or BMEHead(self.mr.feature_channels, config.bme_widths, seed=config.seed + 4, dtype=dtype)

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint, mode: Optional[str] = None) -> Pipeline:
        """Networks rebuilt from the stored configuration, optionally switched to another mode"""

        config = PipelineConfig.from_text(checkpoint.config_text)
        if mode is not None:
            config = config.with_overrides(mode=mode)
        pipeline = cls(config)
        pipeline.load_parameters(checkpoint.params)
        return pipeline

    def components(self) -> dict[str, Module]:
        return {'nme': self.nme, 'mr': self.mr, 'bme': self.bme}

    def parameters(self) -> dict[str, Tensor]:
        return {f'{prefix}.{name}': param
                for prefix, net in self.components().items() for name, param in net.parameters().items()}

    def param_counts(self) -> dict[str, int]:
        return {prefix: param_count(net) for prefix, net in self.components().items()}

    def zero_grad(self) -> None:
        for net in self.components().values():
            net.zero_grad()

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        for prefix, net in self.components().items():
            net.load_parameters({name[len(prefix) + 1:]: array for name, array in values.items()
                                 if name.startswith(f'{prefix}.')})

    def estimate_coeffs(self, batch: QuadBatch, mode: Optional[str] = None,
                        t: Optional[float] = None) -> MotionCoeffs:
        """Motion coefficients of a batch; the gt-coeffs oracle depends on the target time"""

        mode = mode or self.config.mode
        dtype = self.config.dtype
        if mode == 'learned':
            return gridnet3d_forward(self.nme, Tensor(batch.packed))
        if mode == 'gt-coeffs':
            if batch.scenes is None:
                raise ContractError("gt-coeffs mode needs synthetic quads with known scene motion")
            t = check_time(batch.t if t is None else t)
            per_scene = [visible_coeffs(spec, t).maps() for spec in batch.scenes]
            return MotionCoeffs(*(Tensor(np.stack([maps[i].data for maps in per_scene]).astype(dtype))
                                  for i in range(4)))
        flows = {k: Tensor(v.astype(np.float64)) for k, v in batch.flows.items()}
        alpha0, beta0 = analytic_coeffs(flows[(0, 1)], flows[(0, -1)])
        alpha1, beta1 = analytic_coeffs(flows[(1, 0)], flows[(1, 2)])
        return MotionCoeffs(alpha0, beta0, alpha1, beta1).astype(dtype)

    def forward(self, batch: QuadBatch, t: Optional[float] = None,
                mode: Optional[str] = None) -> tuple[Tensor, Diagnostics]:
        """
        Interpolated frames of a batch; differentiable with respect to the
        network parameters when run under a tape

        :param batch: stacked quads
        :param t: target time, defaults to the batch's
        :param mode: overrides the configured mode

        :return: ([B, 3, H, W] frames, diagnostics)
        """

        mode = mode or self.config.mode
        t = check_time(batch.t if t is None else t)
        frame0, frame1 = Tensor(batch.frame0), Tensor(batch.frame1)

        coeffs = self.estimate_coeffs(batch, mode, t)
        flow_0t = eval_quadratic_flow(coeffs, t, 0)
        flow_1t = eval_quadratic_flow(coeffs, t, 1)
        flow_t0, holes0 = reverse_flow(flow_0t)
        flow_t1, holes1 = reverse_flow(flow_1t)

        if mode == 'learned':
            warped0, warped1 = backward_warp(frame0, flow_t0), backward_warp(frame1, flow_t1)
            offsets0, residuals0, offsets1, residuals1, features = mr_forward(
                self.mr, frame0, frame1, warped0, warped1, flow_t0, flow_t1)
            refined_t0 = apply_refinement(flow_t0, offsets0, residuals0)
            refined_t1 = apply_refinement(flow_t1, offsets1, residuals1)
            mask = bme_forward(self.bme, backward_warp(frame0, refined_t0), backward_warp(frame1, refined_t1),
                               features)
        else:
            refined_t0, refined_t1 = flow_t0, flow_t1
            mask = Tensor(np.full((batch.size, 1) + batch.frame0.shape[-2:], 0.5, dtype=batch.frame0.dtype))

        frame = synthesize_frame(frame0, frame1, refined_t0, refined_t1, mask, t)
        return frame, Diagnostics(flow_0t, flow_1t, flow_t0, flow_t1, refined_t0, refined_t1, mask,
                                  (holes0, holes1), coeffs)


def pad_quad(quad: Quad, multiple: int = 4) -> Quad:
    """Reflect-pads every raster of a quad to a multiple of the given size (ground truth motion dropped)"""

    def image(x):
        return reflect_pad(x, multiple, (-2, -1))

    def raster(x):
        return reflect_pad(x, multiple, (0, 1))

    return replace(quad,
                   frames={k: image(v) for k, v in quad.frames.items()},
                   flows={k: type(v)(raster(v.data)) for k, v in quad.flows.items()},
                   occlusions={k: type(v)(raster(v.data)) for k, v in quad.occlusions.items()},
                   gt_frame=None if quad.gt_frame is None else image(quad.gt_frame),
                   gt_coeffs=None, gt_backward=None, scene=None)


def interpolate(quad: Quad, config: PipelineConfig, t: Optional[float] = None,
                pipeline: Optional[Pipeline] = None) -> tuple[np.ndarray, Diagnostics]:
    """
    Interpolates the frame at time t between I0 and I1 of a quad.
    In the learned mode a canvas not divisible by 4 is reflect-padded and
    the result cropped back.

    :param quad: input quad
    :param config: settings (mode, precision, two_frame_input)
    :param t: target time, defaults to quad.t
    :param pipeline: networks to use in the learned mode, built from config when omitted

    :return: ([3, H, W] frame, diagnostics of that frame without batch axis)
    """

    t = check_time(quad.t if t is None else t)
    if config.mode == 'gt-coeffs' and quad.scene is None:
        raise ContractError(f"gt-coeffs mode needs a synthetic quad, {quad.source} has no scene motion")
    pipeline = pipeline or Pipeline(config)
    if config.two_frame_input:
        quad = quad.as_two_frame()

    height, width = quad.height, quad.width
    padded = config.mode == 'learned' and (height % 4 or width % 4)
    if padded:
        logger.info(f"{quad.source}: {height}x{width} is not divisible by 4, reflect-padding")
        quad = pad_quad(quad)

    frame, diagnostics = pipeline.forward(QuadBatch.from_quads([quad], config.dtype), t, config.mode)
    frame_data, diagnostics = frame.data[0], diagnostics.item(0)
    if padded:
        frame_data = frame_data[:, :height, :width]
        diagnostics = diagnostics.crop(height, width)
    return frame_data, diagnostics


def interpolate_multi(quad: Quad, config: PipelineConfig, ts: Sequence[float],
                      pipeline: Optional[Pipeline] = None) -> list[tuple[float, np.ndarray]]:
    """
    Direct evaluation at several times (no recursion), returned in time order

    :param quad: input quad
    :param config: settings
    :param ts: target times in (0, 1)
    :param pipeline: shared networks

    :return: list of (t, frame)
    """

    pipeline = pipeline or Pipeline(config)
    return [(t, interpolate(quad, config, t, pipeline)[0]) for t in sorted(check_time(t) for t in ts)]


# parameter counts (millions) of the full-scale components, for comparison
REFERENCE_PARAMS_M = {'NME': 2.44, 'BFE': 0.0, 'MR': 2.25, 'BME': 0.04, 'synthesis': 0.0}


def component_table(pipeline: Pipeline) -> pd.DataFrame:
    """
    Learnable parameters and mean measured runtime of every pipeline
    component, next to the full-scale reference counts

    :param pipeline: networks

    :return: DataFrame indexed by component
    """

    counts = pipeline.param_counts()
    runtimes = component_runtimes()
    params = {'NME': counts['nme'], 'BFE': 0, 'MR': counts['mr'], 'BME': counts['bme'], 'synthesis': 0}
    specs = {'NME': 'GridNet-3D', 'BFE': '-', 'MR': 'GridNet-2D', 'BME': '3 conv + sigmoid', 'synthesis': '-'}
    rows = []
    for name, count in params.items():
        runtime = float(runtimes.loc[name, 'mean_s']) if name in runtimes.index else float('nan')
        rows.append({'component': name, 'specification': specs[name], 'params': count,
                     'params_m': count / 1e6, 'reference_m': REFERENCE_PARAMS_M[name], 'runtime_s': runtime})
    return pd.DataFrame(rows).set_index('component')

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

import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from Exceptions import ContractError, DimensionError, FormatError, LoadError
from Logger import get_logger, log
from motion.Flow import FlowField, MotionCoeffs, OcclusionMap
from motion.Quadratic import check_time
from synth.Scene import SHAPES, FLOW_MODELS, SceneObject, SceneSpec, analytic_flow, gt_coeffs, render_scene

FRAME_TIMES = (-1, 0, 1, 2)
FLOW_PAIRS = ((-1, 0), (0, -1), (0, 1), (1, 0), (1, 2), (2, 1))
REFERENCE_SIZE = 64

logger = get_logger('synth')


@dataclass(frozen=True)
class Difficulty:
    """
    Ranges used by the random scene generator. Sizes are fractions of the
    canvas; speed (px per interval) and acceleration (px per interval^2)
    are given for a 64 px canvas and scale with the canvas.
    """

    objects: tuple[int, int]
    size: tuple[float, float]
    speed: float
    accel: float


DIFFICULTIES = {
    'linear': Difficulty(objects=(1, 2), size=(0.18, 0.3), speed=2.5, accel=0.0),
    'moderate': Difficulty(objects=(1, 2), size=(0.18, 0.3), speed=2.0, accel=1.0),
    'hard': Difficulty(objects=(2, 3), size=(0.22, 0.35), speed=3.5, accel=2.0),
}


@dataclass
class Quad:
    """
    Four consecutive frames I-1, I0, I1, I2 ([3, H, W] in [0, 1]) with
    observed flows and occlusion maps for every consecutive pair in both
    directions (keyed by (from, to)), the target time and, for synthetic
    quads, the ground truth at t.
    """

    frames: dict[int, np.ndarray]
    flows: dict[tuple[int, int], FlowField]
    occlusions: dict[tuple[int, int], OcclusionMap]
    t: float = 0.5
    gt_frame: Optional[np.ndarray] = None
    gt_coeffs: Optional[MotionCoeffs] = None
    gt_backward: Optional[tuple[FlowField, FlowField]] = None
    scene: Optional[SceneSpec] = None
    flow_model: str = 'exact'
    source: str = 'synthetic'

    def __post_init__(self) -> None:
        check_time(self.t)
        missing = [k for k in FRAME_TIMES if k not in self.frames] + \
                  [k for k in FLOW_PAIRS if k not in self.flows or k not in self.occlusions]
        if missing:
            raise ContractError(f"quad from {self.source} is missing {missing}")
        shape = self.frames[0].shape[-2:]
        rasters = [f.shape[-2:] for f in self.frames.values()] + [f.data.shape[:2] for f in self.flows.values()] + \
                  [o.data.shape for o in self.occlusions.values()]
        if self.gt_frame is not None:
            rasters.append(self.gt_frame.shape[-2:])
        if any(tuple(r) != tuple(shape) for r in rasters):
            raise DimensionError(f"quad from {self.source} has rasters of different sizes")

    @property
    def height(self) -> int:
        return self.frames[0].shape[-2]

    @property
    def width(self) -> int:
        return self.frames[0].shape[-1]

    @property
    def is_synthetic(self) -> bool:
        return self.scene is not None

    def at_time(self, t: float) -> Quad:
        """Same quad targeting another time; synthetic ground truth is re-rendered"""

        check_time(t)
        if self.scene is None:
            return replace(self, t=t, gt_frame=None, gt_backward=None)
        return replace(self, t=t, gt_frame=render_scene(self.scene, t), gt_backward=_backward_flows(self.scene, t))

    def as_two_frame(self) -> Quad:
        """Frame-repetition form {I0, I0, I1, I1}; repeated pairs carry zero flow and occlusion"""

        h, w = self.height, self.width
        frames = {-1: self.frames[0], 0: self.frames[0], 1: self.frames[1], 2: self.frames[1]}
        flows = dict(self.flows)
        occlusions = dict(self.occlusions)
        for pair in ((-1, 0), (0, -1), (1, 2), (2, 1)):
            flows[pair] = FlowField.zeros(h, w, self.flows[(0, 1)].data.dtype)
            occlusions[pair] = OcclusionMap.zeros(h, w)
        return replace(self, frames=frames, flows=flows, occlusions=occlusions, source=f'{self.source} (two-frame)')


def _backward_flows(spec: SceneSpec, t: float) -> tuple[FlowField, FlowField]:
    return analytic_flow(spec, t, 0.0)[0], analytic_flow(spec, t, 1.0)[0]


def quad_from_scene(spec: SceneSpec, t: float = 0.5, flow_model: str = 'exact', source: str = 'synthetic') -> Quad:
    """
    Renders the four frames and the ground truth of a scene and derives
    the observed flows and occlusion maps

    :param spec: scene
    :param t: target time in (0, 1)
    :param flow_model: 'exact' or 'estimator' observed flows
    :param source: provenance tag

    :return:
    """

    check_time(t)
    frames = {k: render_scene(spec, float(k)) for k in FRAME_TIMES}
    flows, occlusions = {}, {}
    for a, b in FLOW_PAIRS:
        flows[(a, b)], occlusions[(a, b)] = analytic_flow(spec, float(a), float(b), flow_model)
    return Quad(frames=frames, flows=flows, occlusions=occlusions, t=t, gt_frame=render_scene(spec, t),
                gt_coeffs=gt_coeffs(spec), gt_backward=_backward_flows(spec, t), scene=spec,
                flow_model=flow_model, source=source)


def _random_object(rng: np.random.Generator, size: int, difficulty: Difficulty, z: int) -> SceneObject:
    scale = size / REFERENCE_SIZE
    lower = -0.5 + 1.0
    upper = size - 0.5 - 1.0
    for _ in range(100):
        shape = SHAPES[int(rng.integers(len(SHAPES)))]
        width = rng.uniform(*difficulty.size) * size
        height = width if shape == 'disk' else rng.uniform(*difficulty.size) * size
        v = rng.uniform(-difficulty.speed, difficulty.speed, 2) * scale
        a = rng.uniform(-difficulty.accel, difficulty.accel, 2) * scale
        seed = int(rng.integers(2 ** 31))
        candidate = SceneObject(shape, width, height, seed, z, (0.0, 0.0), tuple(v), tuple(a))
        low, high = candidate.trajectory_bounds()
        half = candidate.half_extent()
        start_min = lower + half - low
        start_max = upper - half - high
        if np.all(start_min < start_max):
            x0 = rng.uniform(start_min, start_max)
            return replace(candidate, x0=tuple(x0))
    raise ContractError(f"could not place an object on a {size} px canvas")


def random_scene(rng: np.random.Generator, size: int = 64, difficulty: str = 'moderate') -> SceneSpec:
    if difficulty not in DIFFICULTIES:
        raise ContractError(f"difficulty must be one of {sorted(DIFFICULTIES)}, got {difficulty!r}")
    params = DIFFICULTIES[difficulty]
    count = int(rng.integers(params.objects[0], params.objects[1] + 1))
    objects = [_random_object(rng, size, params, z) for z in range(count)]
    return SceneSpec(width=size, height=size, background_seed=int(rng.integers(2 ** 31)), objects=objects)


@log(my_logger=logger)
def make_dataset(n: int, seed: int, size: int = 64, difficulty: str = 'moderate', t: float = 0.5,
                 flow_model: str = 'exact') -> list[Quad]:
    """
    Deterministic synthetic dataset. Every quad draws from its own child
    seed, so a smaller n yields a prefix of a larger one.

    :param n: number of quads
    :param seed: master seed
    :param size: canvas side in px
    :param difficulty: 'linear' (no acceleration), 'moderate' or 'hard' (more, larger, faster objects)
    :param t: target time of every quad
    :param flow_model: observed flow model, see analytic_flow

    :return:
    """

    if flow_model not in FLOW_MODELS:
        raise ContractError(f"flow model must be one of {FLOW_MODELS}, got {flow_model!r}")
    quads = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n)):
        spec = random_scene(np.random.default_rng(child), size, difficulty)
        quads.append(quad_from_scene(spec, t, flow_model, source=f'synthetic:{seed}:{i}'))
    logger.info(f"generated {n} {difficulty} quads of {size}x{size} (seed {seed})")
    return quads


def parse_scene(text: str) -> SceneSpec:
    """
    Reads a scene description: whitespace-separated lines
        canvas W H
        background SEED
        rect|disk WIDTH HEIGHT TEXTURE_SEED Z X0 Y0 VX VY AX AY
    with # comments

    :param text: file content

    :return:
    """

    width = height = None
    background = 0
    objects = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].split()
        if not line:
            continue
        try:
            if line[0] == 'canvas' and len(line) == 3:
                width, height = int(line[1]), int(line[2])
            elif line[0] == 'background' and len(line) == 2:
                background = int(line[1])
            elif line[0] in SHAPES and len(line) == 11:
                values = [float(v) for v in line[1:]]
                objects.append(SceneObject(line[0], values[0], values[1], int(values[2]), int(values[3]),
                                           tuple(values[4:6]), tuple(values[6:8]), tuple(values[8:10])))
            else:
                raise FormatError(f"line {number}: cannot parse {raw.strip()!r}")
        except ValueError as e:
            raise FormatError(f"line {number}: {e}") from e
    if width is None:
        raise FormatError("scene description has no canvas line")
    return SceneSpec(width=width, height=height, background_seed=background, objects=objects)


def scene_to_text(spec: SceneSpec) -> str:
    lines = [f'canvas {spec.width} {spec.height}', f'background {spec.background_seed}']
    for o in spec.objects:
        numbers = [repr(float(v)) for v in (o.width, o.height) + o.x0 + o.v + o.a]
        lines.append(' '.join([o.shape] + numbers[:2] + [str(int(o.texture_seed)), str(int(o.z))] + numbers[2:]))
    return '\n'.join(lines) + '\n'


def read_scene_file(path: str) -> SceneSpec:
    if not os.path.isfile(path):
        raise LoadError(f"scene file {path} does not exist")
    with open(path, encoding='utf-8') as file:
        return parse_scene(file.read())

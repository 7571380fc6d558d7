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
from typing import Sequence

import numpy as np
import scipy.ndimage

from Exceptions import ContractError
from motion.Flow import FlowField, MotionCoeffs, OcclusionMap
from tensor import Tensor

SHAPES = ('rect', 'disk')
FLOW_MODELS = ('exact', 'estimator')
TIME_RANGE = (-1.0, 2.0)
MARGIN = 1.0
SUPERSAMPLING = 4
BACKGROUND = -1


@dataclass(frozen=True)
class Texture:
    """
    Smooth per-channel sinusoid c(u, v) = base + amplitude * sin(k . (u, v) + phase)
    evaluated in the object's own coordinates, so that it moves with the object
    """

    base: tuple[float, float, float]
    amplitude: tuple[float, float, float]
    wavelength: float
    angle: float
    phase: tuple[float, float, float]

    @classmethod
    def from_seed(cls, seed: int, base_range: tuple[float, float] = (0.35, 0.65)) -> Texture:
        rng = np.random.default_rng(seed)
        return cls(base=tuple(rng.uniform(*base_range, 3)),
                   amplitude=tuple(rng.uniform(0.03, 0.06, 3)),
                   wavelength=float(rng.uniform(16.0, 32.0)),
                   angle=float(rng.uniform(0, np.pi)),
                   phase=tuple(rng.uniform(0, 2 * np.pi, 3)))

    def sample(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        k = 2 * np.pi / self.wavelength
        arg = k * (u * np.cos(self.angle) + v * np.sin(self.angle))
        channels = [b + a * np.sin(arg + p) for b, a, p in zip(self.base, self.amplitude, self.phase)]
        return np.stack(channels, axis=0)


@dataclass
class SceneObject:
    """
    Rigid textured shape in uniformly accelerated motion:
    centre(t) = x0 + v t + a t^2 / 2, with t in frame intervals.
    A disk uses width as its diameter.
    """

    shape: str
    width: float
    height: float
    texture_seed: int
    z: int
    x0: tuple[float, float]
    v: tuple[float, float] = (0.0, 0.0)
    a: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ContractError(f"object shape must be one of {SHAPES}, got {self.shape!r}")
        if self.width <= 0 or self.height <= 0:
            raise ContractError(f"object size must be positive, got {self.width}x{self.height}")
        if self.shape == 'disk' and self.width != self.height:
            raise ContractError(f"disk needs equal width and height, got {self.width}x{self.height}")
        self.x0 = tuple(float(c) for c in self.x0)
        self.v = tuple(float(c) for c in self.v)
        self.a = tuple(float(c) for c in self.a)

    @property
    def texture(self) -> Texture:
        return Texture.from_seed(self.texture_seed)

    def velocity(self, t: float) -> np.ndarray:
        return np.asarray(self.v) + np.asarray(self.a) * t

    def displacement(self, from_t: float, to_t: float) -> np.ndarray:
        """centre(to_t) - centre(from_t) = vel(from_t) dt + (a / 2) dt^2"""

        dt = to_t - from_t
        half_acc = np.asarray(self.a) * 0.5
        return self.velocity(from_t) * dt + half_acc * (dt * dt)

    def position(self, t: float) -> np.ndarray:
        return np.asarray(self.x0) + self.displacement(0.0, t)

    def half_extent(self) -> np.ndarray:
        return np.array([self.width / 2, self.height / 2])

    def contains(self, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
        cx, cy = self.position(t)
        if self.shape == 'rect':
            return (np.abs(x - cx) < self.width / 2) & (np.abs(y - cy) < self.height / 2)
        radius = self.width / 2
        return (x - cx) ** 2 + (y - cy) ** 2 < radius * radius

    def coverage(self, t: float, height: int, width: int) -> np.ndarray:
        """
        Fraction of every pixel covered by the shape. Rectangles use the
        exact overlap area, disks 4x4 supersampling.
        """

        cx, cy = self.position(t)
        if self.shape == 'rect':
            cols, rows = np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64)
            ox = np.clip(np.minimum(cols + 0.5, cx + self.width / 2) - np.maximum(cols - 0.5, cx - self.width / 2), 0, 1)
            oy = np.clip(np.minimum(rows + 0.5, cy + self.height / 2) - np.maximum(rows - 0.5, cy - self.height / 2), 0, 1)
            return np.outer(oy, ox)

        steps = (np.arange(SUPERSAMPLING) + 0.5) / SUPERSAMPLING - 0.5
        sub_x = (np.arange(width)[:, None] + steps[None, :]).reshape(-1)
        sub_y = (np.arange(height)[:, None] + steps[None, :]).reshape(-1)
        xs, ys = np.meshgrid(sub_x, sub_y)
        inside = self.contains(xs, ys, t).astype(np.float64)
        return inside.reshape(height, SUPERSAMPLING, width, SUPERSAMPLING).mean(axis=(1, 3))

    def trajectory_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Componentwise min and max of the centre over the validated time range"""

        times = list(TIME_RANGE)
        for axis in range(2):
            if self.a[axis] != 0:
                vertex = -self.v[axis] / self.a[axis]
                if TIME_RANGE[0] < vertex < TIME_RANGE[1]:
                    times.append(vertex)
        positions = np.array([self.position(t) for t in times])
        return positions.min(axis=0), positions.max(axis=0)


@dataclass
class SceneSpec:
    """
    Canvas, static background texture and moving objects. Every object
    stays at least one pixel inside the canvas for t in [-1, 2].
    """

    width: int
    height: int
    background_seed: int = 0
    objects: list[SceneObject] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ContractError(f"canvas must be at least 2x2, got {self.width}x{self.height}")
        z_values = [o.z for o in self.objects]
        if len(set(z_values)) != len(z_values):
            raise ContractError(f"object z-orders must be distinct, got {z_values}")
        upper = np.array([self.width - 0.5, self.height - 0.5]) - MARGIN
        lower = np.array([-0.5, -0.5]) + MARGIN
        for i, obj in enumerate(self.objects):
            low, high = obj.trajectory_bounds()
            half = obj.half_extent()
            if np.any(low - half < lower) or np.any(high + half > upper):
                raise ContractError(f"object {i} leaves the canvas (less than {MARGIN:g} px margin) "
                                    f"for t in [{TIME_RANGE[0]:g}, {TIME_RANGE[1]:g}]")

    @property
    def background(self) -> Texture:
        return Texture.from_seed(self.background_seed, base_range=(0.45, 0.55))

    def painter_order(self) -> list[int]:
        return sorted(range(len(self.objects)), key=lambda i: self.objects[i].z)

    def z_table(self) -> np.ndarray:
        """z of every owner index, shifted by one so that the background (-1) maps to -inf"""

        return np.array([-np.inf] + [o.z for o in self.objects], dtype=np.float64)


def pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    cols, rows = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    return cols, rows


def render_scene(spec: SceneSpec, t: float) -> np.ndarray:
    """
    Anti-aliased rendering at time t, objects composited in z order

    :param spec: scene
    :param t: time in frame intervals

    :return: [3, H, W] float64 in [0, 1]
    """

    cols, rows = pixel_grid(spec.height, spec.width)
    image = spec.background.sample(cols, rows)
    for i in spec.painter_order():
        obj = spec.objects[i]
        cover = obj.coverage(t, spec.height, spec.width)
        cx, cy = obj.position(t)
        colour = obj.texture.sample(cols - cx, rows - cy)
        image = image * (1 - cover) + colour * cover
    return np.clip(image, 0, 1)


def topmost_at(spec: SceneSpec, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """Index of the highest object containing each point at time t, -1 for background"""

    owner = np.full(np.shape(x), BACKGROUND, dtype=np.int64)
    for i in spec.painter_order():
        owner[spec.objects[i].contains(x, y, t)] = i
    return owner


def ownership(spec: SceneSpec, t: float) -> np.ndarray:
    """Owner of every pixel centre at time t, [H, W] int"""

    cols, rows = pixel_grid(spec.height, spec.width)
    return topmost_at(spec, cols, rows, t)


def _lookup(table_rows: Sequence[np.ndarray], owner: np.ndarray) -> np.ndarray:
    table = np.zeros((len(table_rows) + 1, 2), dtype=np.float64)
    for i, row in enumerate(table_rows):
        table[i + 1] = row
    return table[owner + 1]


def analytic_flow(spec: SceneSpec, from_t: float, to_t: float,
                  flow_model: str = 'exact') -> tuple[FlowField, OcclusionMap]:
    """
    Displacement of the owner of every pixel between two times, with the
    occlusion of its landing point. A pixel is occluded when it lands off
    the canvas or under an object with strictly higher z.

    With flow_model 'estimator', pixels whose landing point is covered by a
    nearer object report that occluder's displacement instead, as a
    brightness-constancy flow estimator would.

    :param spec: scene
    :param from_t: source time
    :param to_t: target time
    :param flow_model: 'exact' or 'estimator'

    :return: (flow, occlusion)
    """

    if flow_model not in FLOW_MODELS:
        raise ContractError(f"flow model must be one of {FLOW_MODELS}, got {flow_model!r}")

    owner = ownership(spec, from_t)
    displacements = [o.displacement(from_t, to_t) for o in spec.objects]
    flow = _lookup(displacements, owner)

    cols, rows = pixel_grid(spec.height, spec.width)
    qx, qy = cols + flow[..., 0], rows + flow[..., 1]
    outside = (qx < -0.5) | (qx > spec.width - 0.5) | (qy < -0.5) | (qy > spec.height - 0.5)
    top = topmost_at(spec, qx, qy, to_t)
    z = spec.z_table()
    covered = z[top + 1] > z[owner + 1]
    occlusion = (outside | covered).astype(np.float64)

    if flow_model == 'estimator' and np.any(covered):
        occluder_flow = _lookup(displacements, top)
        flow = np.where(covered[..., None], occluder_flow, flow)

    return FlowField(flow), OcclusionMap(occlusion)


def gt_coeffs(spec: SceneSpec) -> MotionCoeffs:
    """
    Exact quadratic coefficients of every pixel's owner: anchor 0 uses the
    owner at t = 0 (alpha = v, beta = a / 2), anchor 1 the owner at t = 1
    (alpha = -(v + a), beta = a / 2)

    :param spec: scene

    :return: coefficient maps [H, W, 2] (float64)
    """

    owner0, owner1 = ownership(spec, 0.0), ownership(spec, 1.0)
    half = [np.asarray(o.a) * 0.5 for o in spec.objects]
    return MotionCoeffs(alpha0=Tensor(_lookup([o.velocity(0.0) for o in spec.objects], owner0)),
                        beta0=Tensor(_lookup(half, owner0)),
                        alpha1=Tensor(_lookup([-o.velocity(1.0) for o in spec.objects], owner1)),
                        beta1=Tensor(_lookup(half, owner1)))


def centroid(spec: SceneSpec, index: int, t: float) -> np.ndarray:
    """Coverage-weighted centroid (x, y) of one object's rendered mask"""

    cover = spec.objects[index].coverage(t, spec.height, spec.width)
    row, col = scipy.ndimage.center_of_mass(cover)
    return np.array([col, row])


def visible_coeffs(spec: SceneSpec, t: float) -> MotionCoeffs:
    """
    Occlusion-aware coefficients for target time t. Pixels of an anchor
    frame that land under a nearer object at t take that occluder's
    coefficients, so that no hidden pixel drags its own motion into the
    occluder's splat; every other pixel keeps its owner's exact ones.

    :param spec: scene
    :param t: target time

    :return: coefficient maps [H, W, 2] (float64)
    """

    cols, rows = pixel_grid(spec.height, spec.width)
    z = spec.z_table()
    half = [np.asarray(o.a) * 0.5 for o in spec.objects]
    maps = []
    for anchor, alpha in ((0.0, [o.velocity(0.0) for o in spec.objects]),
                          (1.0, [-o.velocity(1.0) for o in spec.objects])):
        owner = ownership(spec, anchor)
        flow = _lookup([o.displacement(anchor, t) for o in spec.objects], owner)
        top = topmost_at(spec, cols + flow[..., 0], rows + flow[..., 1], t)
        source = np.where(z[top + 1] > z[owner + 1], top, owner)
        maps += [Tensor(_lookup(alpha, source)), Tensor(_lookup(half, source))]
    return MotionCoeffs(*maps)

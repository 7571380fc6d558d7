import os
import tempfile
import time
import unittest

import numpy as np
import scipy.ndimage
from numpy.testing import assert_allclose, assert_array_equal

from Exceptions import ContractError, DimensionError, FormatError, LoadError
from motion import backward_warp, quadratic_flow
from synth import (FLOW_PAIRS, SceneObject, SceneSpec, analytic_flow, brute_force_reverse, centroid, gt_coeffs,
                   make_dataset, ownership, parse_scene, quad_from_scene, read_scene_file, render_scene,
                   scene_to_text, visible_coeffs)
from tensor import Tensor
from utility_functions.Utilities import slow_tests_enabled

ACCELERATED = """
# one accelerating rectangle and a disk passing underneath it
canvas 64 64
background 3
rect 14 10 21 2 30 24 2.0 1.5 -0.8 0.6
disk 12 12 8 1 22 40 1.5 -1.0 0.4 0.2
"""


def rect(x0, v=(0.0, 0.0), a=(0.0, 0.0), z=0, size=(10.0, 8.0), seed=1):
    return SceneObject('rect', size[0], size[1], seed, z, x0, v, a)


class TestRendering(unittest.TestCase):
    def test_objects_at_initial_position(self):
        spec = SceneSpec(48, 40, 0, [rect((20.0, 15.0)), rect((31.25, 27.5), z=1, seed=2)])
        assert_allclose(centroid(spec, 0, 0.0), [20.0, 15.0], atol=1e-9)
        assert_allclose(centroid(spec, 1, 0.0), [31.25, 27.5], atol=1e-9)

    def test_static_scene(self):
        spec = SceneSpec(32, 32, 4, [rect((15.0, 15.0))])
        frame = render_scene(spec, 0.0)
        for t in (-1.0, 0.3, 2.0):
            assert_array_equal(render_scene(spec, t), frame)

    def test_centroid_displacement(self):
        spec = parse_scene(ACCELERATED)
        for index, obj in enumerate(spec.objects):
            moved = centroid(spec, index, 1.0) - centroid(spec, index, 0.0)
            assert_allclose(moved, np.asarray(obj.v) + np.asarray(obj.a) / 2, atol=0.1)

    def test_range(self):
        frame = render_scene(parse_scene(ACCELERATED), 0.5)
        self.assertEqual(frame.shape, (3, 64, 64))
        self.assertTrue(np.all((frame >= 0) & (frame <= 1)))


class TestSceneValidation(unittest.TestCase):
    def test_margin(self):
        with self.assertRaises(ContractError):
            SceneSpec(32, 32, 0, [rect((6.0, 16.0), v=(2.0, 0.0))])

    def test_distinct_z(self):
        with self.assertRaises(ContractError):
            SceneSpec(32, 32, 0, [rect((10.0, 10.0)), rect((20.0, 20.0))])

    def test_disk_needs_square_extent(self):
        with self.assertRaises(ContractError):
            SceneObject('disk', 6.0, 8.0, 0, 0, (10.0, 10.0))

    def test_text_round_trip(self):
        spec = make_dataset(1, seed=4, size=32, difficulty='hard')[0].scene
        self.assertEqual(parse_scene(scene_to_text(spec)), spec)

    def test_malformed_lines(self):
        for text in ('canvas 32', 'canvas 32 32\nrect 1 2 3', 'canvas 32 32\nrect a b c d e f g h i j',
                     'background 3'):
            with self.assertRaises(FormatError):
                parse_scene(text)

    def test_missing_file(self):
        with self.assertRaises(LoadError):
            read_scene_file(os.path.join(tempfile.gettempdir(), 'no-such-scene.txt'))


class TestAnalyticFlow(unittest.TestCase):
    def test_same_time(self):
        flow, occlusion = analytic_flow(parse_scene(ACCELERATED), 0.5, 0.5)
        assert_array_equal(flow.data, 0.0)
        assert_array_equal(occlusion.data, 0.0)

    def test_constant_velocity_inside_object(self):
        spec = SceneSpec(48, 48, 0, [rect((20.0, 22.0), v=(1.5, -0.5))])
        flow, _ = analytic_flow(spec, 0.0, 2.0)
        inside = ownership(spec, 0.0) == 0
        self.assertGreater(inside.sum(), 0)
        assert_array_equal(flow.data[inside], np.tile([3.0, -1.0], (inside.sum(), 1)))
        assert_array_equal(flow.data[~inside], 0.0)

    def test_occlusion_against_point_tests(self):
        spec = parse_scene(ACCELERATED)
        for from_t, to_t in FLOW_PAIRS:
            flow, occlusion = analytic_flow(spec, float(from_t), float(to_t))
            self.assertTrue(set(np.unique(occlusion.data)) <= {0.0, 1.0})
            expected = np.zeros((spec.height, spec.width))
            for y in range(spec.height):
                for x in range(spec.width):
                    owner_z = -np.inf
                    for obj in spec.objects:
                        if obj.contains(np.array(x), np.array(y), from_t) and obj.z > owner_z:
                            owner_z = obj.z
                    qx, qy = x + flow.data[y, x, 0], y + flow.data[y, x, 1]
                    if not (-0.5 <= qx <= spec.width - 0.5 and -0.5 <= qy <= spec.height - 0.5):
                        expected[y, x] = 1
                        continue
                    for obj in spec.objects:
                        if obj.z > owner_z and obj.contains(np.array(qx), np.array(qy), to_t):
                            expected[y, x] = 1
            assert_array_equal(occlusion.data, expected)
        self.assertGreater(analytic_flow(spec, 0.0, 1.0)[1].data.sum(), 0)

    def test_estimator_flow_takes_occluder_motion(self):
        spec = parse_scene(ACCELERATED)
        exact, occlusion = analytic_flow(spec, 0.0, 1.0)
        estimated, _ = analytic_flow(spec, 0.0, 1.0, flow_model='estimator')
        # background pixels stay put, so the landing point is the pixel itself
        covered = (occlusion.data == 1) & (ownership(spec, 0.0) == -1) & (ownership(spec, 1.0) == 0)
        self.assertGreater(covered.sum(), 0)
        assert_allclose(estimated.data[covered], np.tile(spec.objects[0].displacement(0.0, 1.0), (covered.sum(), 1)))
        assert_array_equal(estimated.data[occlusion.data == 0], exact.data[occlusion.data == 0])


class TestGroundTruthCoefficients(unittest.TestCase):
    def test_linear_motion_has_zero_beta(self):
        for quad in make_dataset(3, seed=2, size=32, difficulty='linear'):
            assert_array_equal(quad.gt_coeffs.beta0.data, 0.0)
            assert_array_equal(quad.gt_coeffs.beta1.data, 0.0)

    def test_consistent_with_analytic_flows(self):
        specs = [parse_scene(ACCELERATED)] + [q.scene for q in make_dataset(4, seed=9, size=48, difficulty='hard')]
        for spec in specs:
            coeffs = gt_coeffs(spec)
            at_one = quadratic_flow(coeffs.alpha0, coeffs.beta0, 1.0).data
            at_zero = quadratic_flow(coeffs.alpha1, coeffs.beta1, 1.0).data
            assert_array_equal(at_one, analytic_flow(spec, 0.0, 1.0)[0].data)
            assert_array_equal(at_zero, analytic_flow(spec, 1.0, 0.0)[0].data)

    def test_anchor_values(self):
        spec = parse_scene(ACCELERATED)
        coeffs = gt_coeffs(spec)
        obj = spec.objects[0]
        inside = ownership(spec, 1.0) == 0
        assert_allclose(coeffs.alpha1.data[inside][0], -(np.asarray(obj.v) + np.asarray(obj.a)))
        assert_allclose(coeffs.beta1.data[inside][0], np.asarray(obj.a) / 2)

    def test_hidden_pixels_take_occluder_coefficients(self):
        spec = SceneSpec(48, 32, 0, [rect((16.0, 16.0), v=(8.0, 0.0), a=(2.0, 0.0))])
        coeffs = visible_coeffs(spec, 0.5)
        # background at t = 0, under the rectangle at t = 0.5
        assert_allclose(coeffs.alpha0.data[16, 22], [8.0, 0.0])
        assert_allclose(coeffs.beta0.data[16, 22], [1.0, 0.0])
        # background at t = 1, still under the rectangle at t = 0.5
        assert_allclose(coeffs.alpha1.data[16, 17], [-10.0, 0.0])
        assert_allclose(coeffs.beta1.data[16, 17], [1.0, 0.0])
        assert_array_equal(coeffs.alpha0.data[16, 30], 0.0)

        exact = gt_coeffs(spec)
        for anchor, maps in ((0.0, (0, 1)), (1.0, (2, 3))):
            visible = analytic_flow(spec, anchor, 0.5)[1].data == 0
            for k in maps:
                assert_array_equal(coeffs.maps()[k].data[visible], exact.maps()[k].data[visible])

    def test_static_scene_has_zero_oracle(self):
        spec = SceneSpec(32, 32, 4, [rect((15.0, 15.0))])
        for m in visible_coeffs(spec, 0.3).maps():
            assert_array_equal(m.data, 0.0)


class TestWarpingClosure(unittest.TestCase):
    @staticmethod
    def settled(owner, radius=2):
        size = 2 * radius + 1
        return scipy.ndimage.maximum_filter(owner, size) == scipy.ndimage.minimum_filter(owner, size)

    def test_backward_warp_reproduces_frame(self):
        spec = SceneSpec(64, 64, 6, [rect((22.0, 30.0), v=(2.5, 1.0), a=(-1.0, 0.5), size=(16.0, 12.0)),
                                     SceneObject('disk', 12.0, 12.0, 4, 1, (44.0, 20.0), (-1.5, 2.0), (0.8, 0.0))])
        for t in (0.3, 0.5, 0.8):
            flow_t0, occlusion = analytic_flow(spec, t, 0.0)
            warped = backward_warp(Tensor(render_scene(spec, 0.0)), flow_t0).data
            owner_t, owner_0 = ownership(spec, t), ownership(spec, 0.0)
            valid = (occlusion.data == 0) & self.settled(owner_t)
            valid &= (owner_t >= 0) | self.settled(owner_0) & (owner_0 == -1)
            self.assertGreater(valid.mean(), 0.5)
            error = np.abs(warped - render_scene(spec, t))[:, valid]
            self.assertLessEqual(error.max(), 2 / 255)


class TestBruteForceReverse(unittest.TestCase):
    def test_zero_flow(self):
        assert_array_equal(brute_force_reverse(np.zeros((4, 5, 2))).data, 0.0)

    def test_single_contributing_pixel(self):
        flow = np.full((4, 4, 2), -10.0)
        flow[1, 1] = [0.3, 0.6]
        out = brute_force_reverse(flow).data
        expected = np.zeros((4, 4, 2))
        expected[1:3, 1:3] = [-0.3, -0.6]
        assert_allclose(out, expected, atol=1e-15)


class TestDataset(unittest.TestCase):
    def test_deterministic(self):
        a = make_dataset(2, seed=5, size=32)
        b = make_dataset(2, seed=5, size=32)
        for qa, qb in zip(a, b):
            self.assertEqual(qa.scene, qb.scene)
            for k in qa.frames:
                assert_array_equal(qa.frames[k], qb.frames[k])
            for pair in FLOW_PAIRS:
                assert_array_equal(qa.flows[pair].data, qb.flows[pair].data)
            assert_array_equal(qa.gt_frame, qb.gt_frame)

    def test_prefix_stable(self):
        short, long = make_dataset(1, seed=8, size=32), make_dataset(3, seed=8, size=32)
        self.assertEqual(short[0].scene, long[0].scene)

    def test_quad_contents(self):
        quad = make_dataset(1, seed=1, size=32, t=0.25)[0]
        self.assertEqual(sorted(quad.frames), [-1, 0, 1, 2])
        self.assertEqual(sorted(quad.flows), sorted(FLOW_PAIRS))
        self.assertEqual(quad.t, 0.25)
        self.assertTrue(quad.is_synthetic)
        assert_array_equal(quad.gt_frame, render_scene(quad.scene, 0.25))

    def test_at_time_rerenders(self):
        quad = make_dataset(1, seed=1, size=32)[0].at_time(0.75)
        assert_array_equal(quad.gt_frame, render_scene(quad.scene, 0.75))
        assert_array_equal(quad.gt_backward[0].data, analytic_flow(quad.scene, 0.75, 0.0)[0].data)

    def test_two_frame_form(self):
        quad = make_dataset(1, seed=1, size=32)[0].as_two_frame()
        assert_array_equal(quad.frames[-1], quad.frames[0])
        assert_array_equal(quad.frames[2], quad.frames[1])
        assert_array_equal(quad.flows[(0, -1)].data, 0.0)

    def test_validation(self):
        quad = make_dataset(1, seed=1, size=32)[0]
        with self.assertRaises(ContractError):
            quad_from_scene(quad.scene, t=1.0)
        frames = dict(quad.frames)
        del frames[2]
        with self.assertRaises(ContractError):
            type(quad)(frames=frames, flows=quad.flows, occlusions=quad.occlusions)
        frames = dict(quad.frames)
        frames[2] = np.zeros((3, 16, 16))
        with self.assertRaises(DimensionError):
            type(quad)(frames=frames, flows=quad.flows, occlusions=quad.occlusions)

    def test_unknown_difficulty(self):
        with self.assertRaises(ContractError):
            make_dataset(1, seed=0, difficulty='extreme')

    @unittest.skipUnless(slow_tests_enabled(), 'set VFIKIT_SLOW_TESTS=1')
    def test_generation_time(self):
        start = time.perf_counter()
        make_dataset(100, seed=0, size=64)
        self.assertLess(time.perf_counter() - start, 60.0)


if __name__ == '__main__':
    unittest.main()

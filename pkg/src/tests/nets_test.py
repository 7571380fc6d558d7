import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from Exceptions import DimensionError
from motion import FlowField, OcclusionMap, apply_refinement, synthesize_frame
from nets import (BMEHead, Conv2d, GridNet2D_MR, GridNet3D, bme_forward, gridnet3d_forward, mr_forward,
                  nme_pack_input, param_count)
from synth.Dataset import FLOW_PAIRS, make_dataset
from tensor import Ops, Tape, Tensor, backward

TINY = (2, 3, 4)


def random_loss(out, seed=0):
    projection = np.random.default_rng(seed).standard_normal(out.shape)
    return Ops.sum(out * Tensor(projection))


class TestParameterCounts(unittest.TestCase):
    def test_single_conv(self):
        self.assertEqual(param_count(Conv2d(3, 8, np.random.default_rng(0))), 224)

    def test_default_configurations(self):
        nme, mr, bme = GridNet3D(), GridNet2D_MR(), BMEHead()
        self.assertEqual(param_count(nme), 1975380)
        self.assertEqual(param_count(mr), 1880776)
        self.assertEqual(param_count(bme), 15745)
        self.assertLess(param_count(nme), 5000000)

    def test_names_are_unique_and_stable(self):
        names = list(GridNet3D(TINY).parameters())
        self.assertEqual(len(names), len(set(names)))
        self.assertEqual(names, list(GridNet3D(TINY, seed=5).parameters()))
        self.assertEqual(names[:2], ['head.weight', 'head.bias'])
        self.assertEqual(names[-2:], ['out.weight', 'out.bias'])

    def test_seeded_initialisation(self):
        a, b = GridNet2D_MR(TINY, seed=3), GridNet2D_MR(TINY, seed=3)
        for (name, p), q in zip(a.parameters().items(), b.parameters().values()):
            assert_array_equal(p.data, q.data, err_msg=name)

    def test_load_parameters_checks_shapes(self):
        net = BMEHead(feature_channels=4, widths=(4, 2))
        values = {name: p.data + 1 for name, p in net.parameters().items()}
        net.load_parameters(values)
        assert_array_equal(net.conv3.bias.data, np.ones(1, dtype=np.float32))
        values['conv1.weight'] = np.zeros((1, 1, 3, 3))
        with self.assertRaises(DimensionError):
            net.load_parameters(values)


class TestGridNet3D(unittest.TestCase):
    def test_output_shape(self):
        net = GridNet3D(TINY)
        coeffs = gridnet3d_forward(net, Tensor(np.zeros((1, 6, 3, 32, 32), dtype=np.float32)))
        self.assertEqual(len(coeffs.maps()), 4)
        for m in coeffs.maps():
            self.assertEqual(m.shape, (1, 32, 32, 2))

    def test_zero_weights_give_zero_coefficients(self):
        net = GridNet3D(TINY)
        net.fill(0.0)
        x = Tensor(np.random.default_rng(0).standard_normal((1, 6, 3, 8, 8)).astype(np.float32))
        for m in gridnet3d_forward(net, x).maps():
            assert_array_equal(m.data, 0.0)

    def test_indivisible_size(self):
        with self.assertRaises(DimensionError):
            gridnet3d_forward(GridNet3D(TINY), Tensor(np.zeros((1, 6, 3, 10, 8), dtype=np.float32)))

    def test_every_parameter_gets_gradient(self):
        net = GridNet3D(TINY, dtype=np.float64)
        x = Tensor(np.random.default_rng(1).standard_normal((1, 6, 3, 8, 8)))
        with Tape() as tape:
            loss = random_loss(net(x))
        backward(tape, loss)
        for name, param in net.parameters().items():
            self.assertIsNotNone(param.grad, name)
            self.assertTrue(np.any(param.grad != 0), name)

    def test_parameter_count_independent_of_size(self):
        net = GridNet3D(TINY)
        count = param_count(net)
        net(Tensor(np.zeros((1, 6, 3, 8, 8), dtype=np.float32)))
        net(Tensor(np.zeros((1, 6, 3, 16, 16), dtype=np.float32)))
        self.assertEqual(param_count(net), count)


class TestRefinementAndBlending(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(2)
        self.frames = [Tensor(rng.uniform(0, 1, (1, 3, 8, 8))) for _ in range(4)]
        self.flows = [Tensor(rng.uniform(-1, 1, (1, 8, 8, 2))) for _ in range(2)]

    def test_shape_preservation(self):
        net = GridNet2D_MR((4, 6, 8))
        rng = np.random.default_rng(3)
        frames = [Tensor(rng.uniform(0, 1, (1, 3, 48, 48)).astype(np.float32)) for _ in range(4)]
        flows = [Tensor(rng.uniform(-1, 1, (1, 48, 48, 2)).astype(np.float32)) for _ in range(2)]
        *parts, features = mr_forward(net, *frames, *flows)
        for part in parts:
            self.assertEqual(part.shape, (1, 48, 48, 2))
        self.assertEqual(features.shape, (1, 4, 48, 48))
        self.assertTrue(np.all(np.isfinite(features.data)))

    def test_zero_weights_give_identity_refinement(self):
        net = GridNet2D_MR(TINY, dtype=np.float64)
        net.fill(0.0)
        offsets0, residuals0, offsets1, residuals1, _ = mr_forward(net, *self.frames, *self.flows)
        assert_allclose(apply_refinement(self.flows[0], offsets0, residuals0).data, self.flows[0].data)
        assert_allclose(apply_refinement(self.flows[1], offsets1, residuals1).data, self.flows[1].data)

    def test_gradient_reaches_every_input_channel(self):
        net = GridNet2D_MR(TINY, dtype=np.float64)
        x = Tensor(np.random.default_rng(4).standard_normal((1, 16, 8, 8)), requires_grad=True)
        with Tape() as tape:
            out, _ = net(x)
            loss = random_loss(out)
        backward(tape, loss)
        for channel in range(16):
            self.assertTrue(np.any(x.grad[0, channel] != 0), channel)

    def test_zero_head_gives_half_mask(self):
        head = BMEHead(feature_channels=2, widths=(3, 2), dtype=np.float64)
        head.fill(0.0)
        features = Tensor(np.random.default_rng(5).standard_normal((1, 2, 8, 8)))
        mask = bme_forward(head, self.frames[2], self.frames[3], features)
        assert_array_equal(mask.data, np.full((1, 1, 8, 8), 0.5))

        out = synthesize_frame(self.frames[0], self.frames[1], self.flows[0], self.flows[1], mask, 0.5)
        expected = synthesize_frame(self.frames[0], self.frames[1], self.flows[0], self.flows[1],
                                    Tensor(np.full((1, 1, 8, 8), 0.5)), 0.5)
        assert_allclose(out.data, expected.data)

    def test_mask_range(self):
        head = BMEHead(feature_channels=2, widths=(3, 2), seed=9, dtype=np.float64)
        features = Tensor(np.random.default_rng(6).standard_normal((1, 2, 8, 8)))
        mask = bme_forward(head, self.frames[2], self.frames[3], features).data
        self.assertGreater(mask.min(), 0.0)
        self.assertLess(mask.max(), 1.0)


class TestPacking(unittest.TestCase):
    def test_zero_input(self):
        flows = {pair: FlowField.zeros(4, 8) for pair in FLOW_PAIRS}
        occlusions = {pair: OcclusionMap.zeros(4, 8) for pair in FLOW_PAIRS}
        packed = nme_pack_input(flows, occlusions)
        self.assertEqual(packed.shape, (1, 6, 3, 4, 8))
        assert_array_equal(packed.data, 0.0)

    def test_slot_layout(self):
        rng = np.random.default_rng(7)
        flows = {pair: FlowField(rng.standard_normal((4, 4, 2))) for pair in FLOW_PAIRS}
        occlusions = {pair: OcclusionMap(rng.uniform(0, 1, (4, 4))) for pair in FLOW_PAIRS}
        packed = nme_pack_input(flows, occlusions, dtype=np.float64).data[0]
        assert_array_equal(np.moveaxis(packed[0:2, 1], 0, -1), flows[(0, 1)].data)
        assert_array_equal(np.moveaxis(packed[2:4, 1], 0, -1), flows[(1, 0)].data)
        assert_array_equal(packed[4, 2], occlusions[(1, 2)].data)
        assert_array_equal(packed[5, 0], occlusions[(0, -1)].data)

    def test_synthetic_quad_means(self):
        quad = make_dataset(1, seed=3, size=32)[0]
        packed = nme_pack_input(quad.flows, quad.occlusions, dtype=np.float64).data[0]
        for slot, (a, b) in enumerate(((-1, 0), (0, 1), (1, 2))):
            assert_allclose(packed[0:2, slot].mean(axis=(1, 2)), quad.flows[(a, b)].data.mean(axis=(0, 1)))
            assert_allclose(packed[2:4, slot].mean(axis=(1, 2)), quad.flows[(b, a)].data.mean(axis=(0, 1)))

    def test_inconsistent_shapes(self):
        flows = {pair: FlowField.zeros(4, 4) for pair in FLOW_PAIRS}
        occlusions = {pair: OcclusionMap.zeros(4, 4) for pair in FLOW_PAIRS}
        occlusions[(1, 2)] = OcclusionMap.zeros(4, 6)
        with self.assertRaises(DimensionError):
            nme_pack_input(flows, occlusions)


if __name__ == '__main__':
    unittest.main()

import unittest

import numpy as np

from Exceptions import ContractError, DimensionError
from losses import (FeatureExtractor, LossWeights, compute_losses, perceptual_loss, psnr, reconstruction_loss,
                    smoothness_loss, ssim, total_loss, warping_loss)
from synth.Dataset import parse_scene, quad_from_scene
from tensor import Tensor, gradcheck

TRANSLATION_SCENE = """
canvas 64 64
background 11
rect 8 8 5 1 24 30 1 0 0 0
"""


def scalar_ssim(x, y, level=1.0):
    """Direct evaluation of the Wang et al. formula window by window"""

    offsets = np.arange(11) - 5.0
    g = np.exp(-offsets ** 2 / (2 * 1.5 ** 2))
    g /= g.sum()
    window = np.outer(g, g)
    c1, c2 = (0.01 * level) ** 2, (0.03 * level) ** 2
    values = []
    for i in range(x.shape[0] - 10):
        for j in range(x.shape[1] - 10):
            a, b = x[i:i + 11, j:j + 11], y[i:i + 11, j:j + 11]
            mu_a, mu_b = np.sum(window * a), np.sum(window * b)
            var_a = np.sum(window * (a - mu_a) ** 2)
            var_b = np.sum(window * (b - mu_b) ** 2)
            cov = np.sum(window * (a - mu_a) * (b - mu_b))
            values.append((2 * mu_a * mu_b + c1) * (2 * cov + c2) /
                          ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return float(np.mean(values))


class TestLossWeights(unittest.TestCase):
    def test_default_weights(self):
        parts = {'reconstruction': 1.0, 'perceptual': 1.0, 'warping': 1.0, 'smoothness': 1.0}
        self.assertAlmostEqual(total_loss(parts, LossWeights()).item(), 307.005, places=9)

    def test_all_zero_parts(self):
        parts = {key: 0.0 for key in ('reconstruction', 'perceptual', 'warping', 'smoothness')}
        self.assertEqual(total_loss(parts, LossWeights()).item(), 0.0)

    def test_late_phase_ignores_warping_and_smoothness(self):
        late = LossWeights(phase='late')
        self.assertEqual((late.lambda_w, late.lambda_s), (0.0, 0.0))
        a = {'reconstruction': 0.3, 'perceptual': 2.0, 'warping': 1.0, 'smoothness': 5.0}
        b = dict(a, warping=100.0, smoothness=-3.0)
        self.assertEqual(total_loss(a, late).item(), total_loss(b, late).item())

    def test_phase_switch(self):
        weights = LossWeights()
        self.assertEqual(weights.at_step(10, 0).phase, 'early')
        self.assertEqual(weights.at_step(9, 10).phase, 'early')
        self.assertEqual(weights.at_step(10, 10).phase, 'late')

    def test_linear_in_each_part(self):
        weights = LossWeights(2.0, 3.0, 5.0, 7.0)
        base = {'reconstruction': 1.0, 'perceptual': 1.0, 'warping': 1.0, 'smoothness': 1.0}
        for key, coefficient in zip(base, (2.0, 3.0, 5.0, 7.0)):
            bumped = dict(base, **{key: 2.0})
            self.assertAlmostEqual(total_loss(bumped, weights).item() - total_loss(base, weights).item(), coefficient)

    def test_invalid_weights(self):
        with self.assertRaises(ContractError):
            LossWeights(lambda_r=-1.0)
        with self.assertRaises(ContractError):
            LossWeights(phase='middle')


class TestLosses(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.pred = Tensor(rng.uniform(0, 1, (1, 3, 8, 8)))
        self.gt = Tensor(rng.uniform(0, 1, (1, 3, 8, 8)))
        self.phi = FeatureExtractor(dtype=np.float64)

    def test_reconstruction(self):
        self.assertEqual(reconstruction_loss(self.gt, self.gt).item(), 0.0)
        self.assertAlmostEqual(reconstruction_loss(self.gt + 0.5, self.gt).item(), 0.5)
        expected = np.mean([abs(p - g) for p, g in zip(self.pred.data.ravel(), self.gt.data.ravel())])
        self.assertAlmostEqual(reconstruction_loss(self.pred, self.gt).item(), expected)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            reconstruction_loss(self.pred, Tensor(np.zeros((1, 3, 8, 4))))

    def test_perceptual(self):
        self.assertEqual(perceptual_loss(self.gt, self.gt, self.phi).item(), 0.0)
        rng = np.random.default_rng(1)
        noise = rng.standard_normal(self.gt.shape)
        small = perceptual_loss(self.gt + Tensor(0.01 * noise), self.gt, self.phi).item()
        large = perceptual_loss(self.gt + Tensor(0.1 * noise), self.gt, self.phi).item()
        self.assertLess(small, large)

    def test_extractor_is_fixed(self):
        other = FeatureExtractor(dtype=np.float64)
        for (w, b), (v, c) in zip(self.phi.layers, other.layers):
            np.testing.assert_array_equal(w.data, v.data)
            self.assertFalse(w.requires_grad)
        self.assertEqual(self.phi(self.gt).shape, (1, 64, 1, 1))

    def test_warping(self):
        zero = Tensor(np.zeros((1, 8, 8, 2)))
        self.assertEqual(warping_loss(self.gt, self.gt, self.gt, zero, zero).item(), 0.0)
        expected = reconstruction_loss(self.pred, self.gt).item() * 2
        self.assertAlmostEqual(warping_loss(self.gt, self.pred, self.pred, zero, zero).item(), expected)

    def test_warping_with_true_flows_on_translation(self):
        quad = quad_from_scene(parse_scene(TRANSLATION_SCENE), t=0.5)
        frame_t, frame0, frame1 = (Tensor(f[None]) for f in (quad.gt_frame, quad.frames[0], quad.frames[1]))
        flow_t0, flow_t1 = (Tensor(f.data[None]) for f in quad.gt_backward)
        # only the half-pixel strips uncovered by the object differ
        self.assertLess(warping_loss(frame_t, frame0, frame1, flow_t0, flow_t1).item(), 2e-3)

    def test_smoothness(self):
        constant = Tensor(np.full((1, 6, 6, 2), 1.5))
        self.assertEqual(smoothness_loss(constant, constant).item(), 0.0)
        cols = np.tile(np.arange(6, dtype=np.float64), (6, 1))
        ramp = Tensor(np.stack([cols, np.zeros_like(cols)], axis=-1)[None])
        # slope 1 in one of two channels along x, nothing along y
        self.assertAlmostEqual(smoothness_loss(ramp, Tensor(np.zeros((1, 6, 6, 2)))).item(), 0.5)

    def test_smoothness_against_loop(self):
        rng = np.random.default_rng(2)
        a, b = rng.standard_normal((2, 1, 5, 4, 2))
        expected = 0.0
        for flow in (a[0], b[0]):
            dx = [abs(flow[y, x + 1, c] - flow[y, x, c]) for y in range(5) for x in range(3) for c in range(2)]
            dy = [abs(flow[y + 1, x, c] - flow[y, x, c]) for y in range(4) for x in range(4) for c in range(2)]
            expected += np.mean(dx) + np.mean(dy)
        self.assertAlmostEqual(smoothness_loss(Tensor(a), Tensor(b)).item(), expected)

    def test_smoothness_needs_two_pixels_per_axis(self):
        for shape in ((1, 6, 1, 2), (1, 1, 6, 2)):
            flow = Tensor(np.ones(shape))
            with self.assertRaises(DimensionError):
                smoothness_loss(flow, flow)
        flow = Tensor(np.ones((1, 2, 2, 2)))
        self.assertEqual(smoothness_loss(flow, flow).item(), 0.0)

    def test_compute_losses_skips_disabled_terms(self):
        flows = Tensor(np.random.default_rng(3).standard_normal((1, 8, 8, 2)))
        parts = compute_losses(self.pred, self.gt, self.pred, self.gt, flows, flows, self.phi,
                               LossWeights(phase='late'))
        values = parts.as_floats()
        self.assertEqual(values['warping'], 0.0)
        self.assertEqual(values['smoothness'], 0.0)
        self.assertGreater(values['perceptual'], 0.0)

    def test_gradients(self):
        rng = np.random.default_rng(4)
        pred = Tensor(rng.uniform(0, 1, (1, 3, 8, 8)))
        self.assertLess(gradcheck(lambda p: reconstruction_loss(p, self.gt), [pred], eps=1e-6), 1e-4)
        self.assertLess(gradcheck(lambda p: perceptual_loss(p, self.gt, self.phi), [pred]), 1e-4)

        flow0 = Tensor(rng.uniform(0.2, 0.8, (1, 8, 8, 2)) * rng.choice([-1.0, 1.0], (1, 8, 8, 2)))
        flow1 = Tensor(rng.uniform(0.2, 0.8, (1, 8, 8, 2)) * rng.choice([-1.0, 1.0], (1, 8, 8, 2)))
        error = gradcheck(lambda f0, f1: warping_loss(self.gt, self.pred, pred, f0, f1), [flow0, flow1], eps=1e-6)
        self.assertLess(error, 1e-4)
        self.assertLess(gradcheck(smoothness_loss, [flow0, flow1], eps=1e-4), 1e-4)


class TestMetrics(unittest.TestCase):
    def test_psnr_closed_form(self):
        gt = np.full((3, 8, 8), 100, dtype=np.uint8)
        self.assertAlmostEqual(psnr(gt + 16, gt), 24.05, delta=0.01)
        self.assertEqual(psnr(gt, gt), 99.0)

    def test_psnr_float_peak(self):
        gt = np.zeros((3, 4, 4))
        self.assertAlmostEqual(psnr(gt + 0.1, gt), 20.0)

    def test_psnr_decreases_with_error(self):
        gt = np.full((3, 8, 8), 0.5)
        values = [psnr(gt + e, gt) for e in (0.01, 0.02, 0.05, 0.1)]
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))

    def test_psnr_against_scalar_loop(self):
        rng = np.random.default_rng(5)
        pred, gt = rng.uniform(0, 1, (2, 3, 6, 6))
        mse = sum((p - g) ** 2 for p, g in zip(pred.ravel(), gt.ravel())) / pred.size
        self.assertAlmostEqual(psnr(pred, gt), 10 * np.log10(1 / mse))

    def test_ssim_identity(self):
        x = np.random.default_rng(6).uniform(0, 1, (3, 16, 16))
        self.assertAlmostEqual(ssim(x, x), 1.0)

    def test_ssim_inverted(self):
        x = np.random.default_rng(7).uniform(0, 1, (16, 16))
        self.assertLess(ssim(1.0 - x, x), 1.0)

    def test_ssim_against_scalar_formula(self):
        ys, xs = np.mgrid[0:16, 0:16] / 15.0
        x = 0.5 + 0.4 * np.sin(3 * xs) * np.cos(2 * ys)
        y = np.clip(x + 0.05 * np.cos(7 * xs + ys), 0, 1)
        self.assertAlmostEqual(ssim(x, y), scalar_ssim(x, y), delta=1e-6)

    def test_ssim_too_small(self):
        with self.assertRaises(DimensionError):
            ssim(np.zeros((3, 8, 8)), np.zeros((3, 8, 8)))


if __name__ == '__main__':
    unittest.main()

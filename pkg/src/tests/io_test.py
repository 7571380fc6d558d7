import os
import struct
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_array_equal

from Exceptions import FormatError, LoadError
from motion import FlowField
from pipeline import (Checkpoint, Pipeline, PipelineConfig, QuadBatch, load_checkpoint, load_dataset, read_flo,
                      read_image, read_manifest, read_png, read_pnm, save_checkpoint, write_dataset, write_flo,
                      write_png, write_pnm)
from synth import FLOW_PAIRS, make_dataset, parse_scene, read_scene_file
from tensor import AdamState


class TestFlo(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.directory.name, 'flow.flo')

    def tearDown(self):
        self.directory.cleanup()

    def test_round_trip(self):
        flow = FlowField(np.random.default_rng(0).standard_normal((5, 7, 2)).astype(np.float32))
        write_flo(flow, self.path)
        assert_array_equal(read_flo(self.path).data, flow.data)

    def test_layout(self):
        data = np.arange(12, dtype=np.float32).reshape(2, 3, 2)
        write_flo(FlowField(data), self.path)
        with open(self.path, 'rb') as file:
            payload = file.read()
        self.assertEqual(payload[:4], bytes([0x50, 0x49, 0x45, 0x48]))
        self.assertEqual(struct.unpack('<ii', payload[4:12]), (3, 2))
        self.assertEqual(len(payload), 12 + 12 * 4)
        self.assertEqual(struct.unpack('<2f', payload[12:20]), (0.0, 1.0))

    def test_truncated(self):
        with open(self.path, 'wb') as file:
            file.write(b'PIEH' + struct.pack('<i', 4) + b'\x01')
        with self.assertRaises(FormatError):
            read_flo(self.path)

        write_flo(FlowField.zeros(3, 3), self.path)
        with open(self.path, 'rb') as file:
            payload = file.read()
        with open(self.path, 'wb') as file:
            file.write(payload[:-4])
        with self.assertRaises(FormatError):
            read_flo(self.path)

    def test_wrong_magic(self):
        with open(self.path, 'wb') as file:
            file.write(b'HEIP' + struct.pack('<ii', 1, 1) + bytes(8))
        with self.assertRaises(FormatError):
            read_flo(self.path)


class TestImages(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.image = np.random.default_rng(1).integers(0, 256, (3, 6, 9), dtype=np.uint8)

    def tearDown(self):
        self.directory.cleanup()

    def path(self, name):
        return os.path.join(self.directory.name, name)

    def test_ppm_round_trip(self):
        write_pnm(self.image, self.path('a.ppm'))
        assert_array_equal(read_pnm(self.path('a.ppm')), self.image)
        with open(self.path('a.ppm'), 'rb') as file:
            self.assertTrue(file.read().startswith(b'P6\n9 6\n255\n'))

    def test_pgm_round_trip(self):
        write_pnm(self.image[0], self.path('a.pgm'))
        assert_array_equal(read_pnm(self.path('a.pgm')), self.image[0])

    def test_png_round_trip(self):
        write_png(self.image, self.path('a.png'))
        assert_array_equal(read_png(self.path('a.png')), self.image)

    def test_float_images_are_quantised(self):
        write_pnm(self.image / 255.0, self.path('b.ppm'))
        assert_array_equal(read_image(self.path('b.ppm')), self.image / 255.0)

    def test_header_comments(self):
        with open(self.path('c.ppm'), 'wb') as file:
            file.write(b'P6\n# written by hand\n2 1\n255\n' + bytes(range(6)))
        assert_array_equal(read_pnm(self.path('c.ppm'))[:, 0, 1], [3, 4, 5])

    def test_unsupported(self):
        with open(self.path('d.ppm'), 'wb') as file:
            file.write(b'P3\n1 1\n255\n0 0 0\n')
        with self.assertRaises(FormatError):
            read_pnm(self.path('d.ppm'))
        with open(self.path('e.ppm'), 'wb') as file:
            file.write(b'P6\n4 4\n255\n' + bytes(5))
        with self.assertRaises(FormatError):
            read_pnm(self.path('e.ppm'))

    def test_missing_image(self):
        with self.assertRaises(LoadError):
            read_image(self.path('missing.png'))


class TestCheckpoint(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.directory.name, 'model.bin')

    def tearDown(self):
        self.directory.cleanup()

    def test_forward_pass_reproduced(self):
        config = PipelineConfig(mode='learned', nme_widths=(2, 3, 4), mr_widths=(2, 3, 4), bme_widths=(3, 2), seed=4)
        pipeline = Pipeline(config)
        adam = AdamState(step=3)
        adam.m['nme.head.bias'] = np.arange(2, dtype=np.float32)
        adam.v['nme.head.bias'] = np.ones(2, dtype=np.float32)
        save_checkpoint(Checkpoint(config.to_text(), {k: v.data for k, v in pipeline.parameters().items()},
                                   adam, step=3), self.path)

        checkpoint = load_checkpoint(self.path)
        self.assertEqual(checkpoint.step, 3)
        self.assertEqual(checkpoint.adam.step, 3)
        assert_array_equal(checkpoint.adam.m['nme.head.bias'], [0, 1])
        self.assertEqual(PipelineConfig.from_text(checkpoint.config_text), config)

        batch = QuadBatch.from_quads(make_dataset(1, seed=2, size=16), config.dtype)
        expected, _ = pipeline.forward(batch)
        restored, _ = Pipeline.from_checkpoint(checkpoint).forward(batch)
        assert_array_equal(restored.data, expected.data)

    def test_corrupt_files(self):
        save_checkpoint(Checkpoint('mode learned\n', {'w': np.zeros((2, 2), dtype=np.float32)}), self.path)
        with open(self.path, 'rb') as file:
            payload = file.read()
        for broken in (b'NOTACKPT' + payload[8:], payload[:-3], payload + b'\x00'):
            with open(self.path, 'wb') as file:
                file.write(broken)
            with self.assertRaises(FormatError):
                load_checkpoint(self.path)

    def test_missing(self):
        with self.assertRaises(LoadError):
            load_checkpoint(self.path)


class TestDatasetFiles(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.quads = make_dataset(2, seed=6, size=16, t=0.25)

    def tearDown(self):
        self.directory.cleanup()

    def test_round_trip(self):
        manifest = write_dataset(self.quads, self.directory.name)
        frame = read_manifest(manifest)
        self.assertEqual(list(frame['id']), ['quad_0000', 'quad_0001'])
        with open(manifest, encoding='utf-8') as file:
            self.assertTrue(file.readline().startswith('id\tt\tframe_m1\tframe_0\tframe_1\tframe_2\t'))

        loaded = load_dataset(self.directory.name)
        for original, quad in zip(self.quads, loaded):
            self.assertEqual(quad.t, 0.25)
            self.assertFalse(quad.is_synthetic)
            self.assertIsNone(quad.gt_coeffs)
            assert_array_equal(quad.frames[0], np.round(original.frames[0] * 255) / 255)
            for pair in FLOW_PAIRS:
                assert_array_equal(quad.flows[pair].data, original.flows[pair].data.astype(np.float32))
                assert_array_equal(quad.occlusions[pair].data, original.occlusions[pair].data)
            self.assertIsNotNone(quad.gt_frame)

        scene = read_scene_file(os.path.join(self.directory.name, 'quad_0001', 'scene.txt'))
        self.assertEqual(scene, self.quads[1].scene)

    def test_single_row(self):
        write_dataset(self.quads, self.directory.name, image_ext='.png')
        (quad,) = load_dataset(self.directory.name, row=1)
        self.assertTrue(quad.source.endswith('quad_0001'))
        with self.assertRaises(LoadError):
            load_dataset(self.directory.name, row=2)

    def test_missing_file_is_named(self):
        write_dataset(self.quads, self.directory.name)
        missing = os.path.join(self.directory.name, 'quad_0000', 'flow_0_1.flo')
        os.remove(missing)
        with self.assertRaises(LoadError) as raised:
            load_dataset(self.directory.name)
        self.assertIn('flow_0_1.flo', str(raised.exception))

    def test_missing_manifest(self):
        with self.assertRaises(LoadError):
            read_manifest(os.path.join(self.directory.name, 'nothing'))

    def test_scene_file_parses(self):
        write_dataset(self.quads[:1], self.directory.name)
        with open(os.path.join(self.directory.name, 'quad_0000', 'scene.txt'), encoding='utf-8') as file:
            self.assertEqual(parse_scene(file.read()), self.quads[0].scene)


if __name__ == '__main__':
    unittest.main()

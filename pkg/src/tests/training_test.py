import os
import tempfile
import unittest
from dataclasses import replace

import numpy as np
import pandas as pd
from numpy.testing import assert_allclose, assert_array_equal

from Exceptions import ContractError, TrainingDiverged
from pipeline import (Pipeline, PipelineConfig, PlateauSchedule, load_checkpoint, train, training_quads,
                      write_training_outputs)
from pipeline.Training import batch_schedule
from synth import make_dataset
from utility_functions.Utilities import slow_tests_enabled


def small_config(**overrides):
    settings = dict(nme_widths=(2, 3, 4), mr_widths=(2, 3, 4), bme_widths=(3, 2), precision='float64',
                    synth_size=16, synth_n=2, batch_size=2, steps=4, log_every=1)
    settings.update(overrides)
    return PipelineConfig(**settings)


class TestSchedules(unittest.TestCase):
    def test_batches_cover_each_epoch(self):
        schedule = batch_schedule(10, 3, 9, seed=0)
        self.assertEqual(len(schedule), 9)
        self.assertTrue(all(len(batch) == 3 for batch in schedule))
        for epoch in range(3):
            indices = sum(schedule[3 * epoch:3 * epoch + 3], [])
            self.assertEqual(len(set(indices)), 9)
        self.assertEqual(batch_schedule(10, 3, 9, seed=0), schedule)

    def test_batch_capped_at_dataset_size(self):
        self.assertEqual([sorted(b) for b in batch_schedule(2, 4, 3, seed=1)], [[0, 1]] * 3)

    def test_plateau(self):
        schedule = PlateauSchedule(1e-3, patience=2, factor=10.0, min_lr=5e-5)
        drops = [schedule.update(1.0) for _ in range(8)]
        self.assertEqual(drops, [False, False, True, False, True, False, False, False])
        self.assertEqual(schedule.lr, 5e-5)

    def test_plateau_disabled(self):
        schedule = PlateauSchedule(1e-3, patience=0, factor=10.0, min_lr=1e-5)
        self.assertFalse(any(schedule.update(1.0) for _ in range(20)))
        self.assertEqual(schedule.lr, 1e-3)


class TestTraining(unittest.TestCase):
    def test_loss_decreases(self):
        result = train(small_config(steps=25, lr=5e-3))
        totals = result.log['total'].to_numpy()
        self.assertEqual(len(totals), 25)
        self.assertLess(totals[-5:].mean(), totals[0])
        self.assertEqual(result.adam.step, 25)

    def test_zero_learning_rate(self):
        config = small_config(lr=0.0)
        quads = training_quads(config)
        pipeline = Pipeline(config)
        before = {k: v.data.copy() for k, v in pipeline.parameters().items()}
        result = train(config, quads, pipeline)
        for name, param in result.pipeline.parameters().items():
            assert_array_equal(param.data, before[name], err_msg=name)
        totals = result.log['total'].to_numpy()
        assert_allclose(totals, totals[0], rtol=1e-10)

    def test_phase_switch(self):
        config = small_config(late_phase_step=3)
        with self.assertLogs('vfikit.train', level='INFO') as logs:
            result = train(config)
        self.assertTrue(any('step 3: late phase' in line for line in logs.output))
        log = result.log.set_index('step')
        self.assertEqual(list(log['lambda_w']), [102.0, 102.0, 0.0, 0.0])
        self.assertEqual(list(log['lambda_s']), [1.0, 1.0, 0.0, 0.0])
        self.assertEqual(list(log['phase']), ['early', 'early', 'late', 'late'])
        self.assertTrue((log.loc[3:, 'warping'] == 0).all())

    def test_deterministic(self):
        config = small_config(synth_n=4, steps=3)
        pd.testing.assert_frame_equal(train(config).log, train(config).log)

    def test_non_finite_loss(self):
        quads = make_dataset(2, seed=0, size=16)
        quads[1] = replace(quads[1], gt_frame=np.full_like(quads[1].gt_frame, np.nan))
        with self.assertRaises(TrainingDiverged) as raised:
            train(small_config(steps=2, batch_size=2), quads)
        self.assertIn('step 1', str(raised.exception))

    def test_needs_ground_truth(self):
        quads = make_dataset(1, seed=0, size=16)
        with self.assertRaises(ContractError):
            train(small_config(), [replace(quads[0], gt_frame=None)])

    def test_two_frame_training_quads(self):
        quads = training_quads(small_config(two_frame_input=True))
        self.assertTrue(all(q.flows[(0, -1)].data.max() == 0 for q in quads))

    def test_outputs(self):
        result = train(small_config(steps=2))
        with tempfile.TemporaryDirectory() as directory:
            paths = write_training_outputs(result, directory)
            for path in paths.values():
                self.assertTrue(os.path.isfile(path), path)
            log = pd.read_csv(paths['log'], sep='\t')
            self.assertEqual(list(log['step']), [1, 2])
            checkpoint = load_checkpoint(paths['checkpoint'])
            self.assertEqual(checkpoint.step, 2)
            self.assertEqual(set(checkpoint.params), set(result.pipeline.parameters()))

    @unittest.skipUnless(slow_tests_enabled(), 'set VFIKIT_SLOW_TESTS=1')
    def test_acceptance_run(self):
        config = PipelineConfig(steps=200, batch_size=4, synth_size=64, synth_difficulty='linear', seed=0)
        first = train(config)
        totals = first.log['total'].to_numpy()
        self.assertLessEqual(totals[-10:].mean(), 0.5 * totals[0])
        pd.testing.assert_frame_equal(first.log, train(config).log)


if __name__ == '__main__':
    unittest.main()

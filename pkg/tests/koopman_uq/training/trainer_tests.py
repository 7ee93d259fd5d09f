# Copyright (c) 2024 The koopman-uq Authors
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# Unit tests for trainer.py
import csv
import logging
import os
import shutil
import sys
import tempfile
import unittest
from concurrent.futures import ThreadPoolExecutor

import mock
import numpy as np

from koopman_uq import consts
from koopman_uq.cli.config import RunConfig
from koopman_uq.dataio.checkpoint import load_checkpoint
from koopman_uq.dataio.systems import SystemSpec, generate
from koopman_uq.diffcore.adam import adam_step
from koopman_uq.diffcore.tape import Tape
from koopman_uq.exceptions import ConfigError, NumericError
from koopman_uq.losses.objectives import (ensemble_loss_crps_proxy,
                                          ensemble_loss_var)
from koopman_uq.training.trainer import (LOG_COLUMNS, EnsembleTrainer,
                                         batch_indices, flatten_params)

logging.basicConfig(stream=sys.stdout, level=logging.DEBUG)
logger = logging.getLogger('trainer_tests')


def tiny_config(**changes):
    values = dict(latent_dim=2, hidden=(3,), ensemble_size=3, steps=4,
                  batch_size=4, seed=7, log_every=1, workers=1, lr=1e-2)
    values.update(changes)
    return RunConfig(**values)


def tiny_dataset():
    return generate(SystemSpec(noise_std=0.01, seed=3), n_series=10,
                    steps=6, dt=0.1)


class BatchTests(unittest.TestCase):
    """
    Tests for the batch schedule
    """

    def test_epoch_covers_every_series(self):
        seen = np.concatenate([batch_indices(1, step, 10, 4)
                               for step in range(3)])
        self.assertEqual(list(range(10)), sorted(seen))
        np.testing.assert_array_equal(batch_indices(1, 4, 10, 4),
                                      batch_indices(1, 4, 10, 4))

    def test_random_windows(self):
        trainer = EnsembleTrainer(tiny_config(random_windows=True),
                                  tiny_dataset())
        batch = trainer.batch(0)
        self.assertEqual(3, batch.horizon)
        self.assertEqual(4, batch.size)


class GradientTests(unittest.TestCase):
    """
    The split member/coupled backward pass against one tape over the whole
    ensemble objective
    """

    def _single_tape(self, trainer, batch, objective, **kwargs):
        tape = Tape()
        bound = [member.bind(tape, 'm%d.' % j)
                 for j, member in enumerate(trainer.ensemble.members)]
        bd = objective(bound, batch, trainer.config.alpha, **kwargs)
        tape.set_output(bd.total)
        return bd, tape.backward()

    def _compare(self, expected_bd, expected_grads, breakdown,
                 grads):
        self.assertEqual(list(expected_grads), list(grads))
        for name, value in expected_grads.items():
            np.testing.assert_allclose(value, grads[name], rtol=1e-9,
                                       atol=1e-11, err_msg=name)
        self.assertAlmostEqual(float(expected_bd.total.value),
                               breakdown.total, delta=1e-9 * abs(
                                   breakdown.total))

    def test_variance_regime(self):
        trainer = EnsembleTrainer(
            tiny_config(regime=consts.REGIME_VARIANCE, lam=0.7),
            tiny_dataset())
        batch = trainer.batch(0)
        breakdown, grads, _ = trainer.compute(trainer.ensemble, batch)
        expected_bd, expected = self._single_tape(
            trainer, batch, ensemble_loss_var, lam=0.7)
        self._compare(expected_bd, expected, breakdown, grads)
        self.assertLess(breakdown.var, 0.0)

    def test_crps_proxy_regime(self):
        trainer = EnsembleTrainer(
            tiny_config(regime=consts.REGIME_CRPS_PROXY), tiny_dataset())
        batch = trainer.batch(1)
        breakdown, grads, _ = trainer.compute(trainer.ensemble, batch)
        expected_bd, expected = self._single_tape(
            trainer, batch, ensemble_loss_crps_proxy, lam=1.0)
        self._compare(expected_bd, expected, breakdown, grads)
        self.assertEqual(1.0, breakdown.lam)

    def test_workers_do_not_change_gradients(self):
        dataset = tiny_dataset()
        serial = EnsembleTrainer(
            tiny_config(regime=consts.REGIME_VARIANCE, lam=0.5), dataset)
        pooled = EnsembleTrainer(
            tiny_config(regime=consts.REGIME_VARIANCE, lam=0.5, workers=3),
            dataset)
        _, first, _ = serial.compute(serial.ensemble, serial.batch(0))
        _, second, _ = pooled.compute(pooled.ensemble, pooled.batch(0))
        for name, value in first.items():
            np.testing.assert_array_equal(value, second[name])


class TrainingTests(unittest.TestCase):
    """
    End-to-end training runs on a tiny architecture
    """

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()
        self.dataset = tiny_dataset()

    def tearDown(self):
        shutil.rmtree(self.tmp_dir)

    def _path(self, name):
        return os.path.join(self.tmp_dir, name)

    def test_independent_equals_variance_at_zero(self):
        independent = EnsembleTrainer(tiny_config(), self.dataset).train()
        variance = EnsembleTrainer(
            tiny_config(regime=consts.REGIME_VARIANCE, lam=0.0),
            self.dataset).train()
        first = flatten_params(independent.checkpoint.ensemble)
        second = flatten_params(variance.checkpoint.ensemble)
        for name, value in first.items():
            np.testing.assert_array_equal(value, second[name])
        self.assertEqual(consts.REGIME_INDEPENDENT,
                         independent.checkpoint.regime)

    def test_resume_matches_uninterrupted(self):
        config = tiny_config(regime=consts.REGIME_VARIANCE, lam=0.5, steps=6)
        straight = EnsembleTrainer(config, self.dataset).train()

        path = self._path('checkpoint.json')
        EnsembleTrainer(config.replace(steps=3), self.dataset).train(
            checkpoint_path=path)
        checkpoint = load_checkpoint(path)
        self.assertEqual(3, checkpoint.step)
        resumed = EnsembleTrainer(config, self.dataset, checkpoint).train()

        self.assertEqual(6, resumed.checkpoint.step)
        first = flatten_params(straight.checkpoint.ensemble)
        second = flatten_params(resumed.checkpoint.ensemble)
        for name, value in first.items():
            np.testing.assert_array_equal(value, second[name])
        self.assertEqual(straight.history[3:], resumed.history)

    def test_resume_rejects_other_regime(self):
        path = self._path('checkpoint.json')
        EnsembleTrainer(tiny_config(steps=1), self.dataset).train(
            checkpoint_path=path)
        with self.assertRaises(ConfigError):
            EnsembleTrainer(tiny_config(regime=consts.REGIME_CRPS_PROXY),
                            self.dataset, load_checkpoint(path))

    def test_log_rows(self):
        config = tiny_config(regime=consts.REGIME_VARIANCE, lam=0.3,
                             steps=5, log_every=2)
        log_path = self._path('train_log.csv')
        result = EnsembleTrainer(config, self.dataset).train(log_path)
        self.assertEqual(5, len(result.history))

        with open(log_path) as f:
            reader = csv.DictReader(f)
            self.assertEqual(list(LOG_COLUMNS), reader.fieldnames)
            rows = list(reader)
        self.assertEqual(['2', '4', '5'], [row['step'] for row in rows])
        for row in rows:
            values = dict((k, float(v)) for k, v in row.items())
            total = (values['pred'] + values['ae'] + values['lin']
                     + config.alpha * values['orth']
                     + config.lam * (values['var'] + values['abs_dev']))
            self.assertAlmostEqual(total, values['total'],
                                   delta=1e-9 * abs(total))
            self.assertAlmostEqual(0.0, values['abs_dev'])
            self.assertGreaterEqual(values['ensemble_variance'], 0.0)

    @mock.patch.dict(os.environ, {consts.THREADS_ENV: '4'})
    def test_one_pool_per_run(self):
        config = tiny_config(regime=consts.REGIME_VARIANCE, lam=0.5,
                             workers=2, steps=3)
        serial = EnsembleTrainer(
            tiny_config(regime=consts.REGIME_VARIANCE, lam=0.5, steps=3),
            self.dataset).train()
        with mock.patch('koopman_uq.utils.workers.ThreadPoolExecutor',
                        wraps=ThreadPoolExecutor) as executor:
            trainer = EnsembleTrainer(config, self.dataset)
            pooled = trainer.train()
        self.assertEqual(1, executor.call_count)
        self.assertIsNone(trainer.pool)
        first = flatten_params(serial.checkpoint.ensemble)
        second = flatten_params(pooled.checkpoint.ensemble)
        for name, value in first.items():
            np.testing.assert_array_equal(value, second[name])

    def test_loss_decreases(self):
        config = tiny_config(steps=40, batch_size=10)
        history = EnsembleTrainer(config, self.dataset).train().history
        self.assertLess(history[-1]['total'], history[0]['total'])

    def test_divergence_keeps_last_good_checkpoint(self):
        calls = list()

        def failing_step(state, params, grads):
            calls.append(state.step)
            if len(calls) == 3:
                raise NumericError('gradient', 'forced overflow')
            return adam_step(state, params, grads)

        path = self._path('checkpoint.json')
        trainer = EnsembleTrainer(tiny_config(steps=5), self.dataset)
        with mock.patch('koopman_uq.training.trainer.adam_step',
                        side_effect=failing_step):
            with self.assertRaises(NumericError):
                trainer.train(checkpoint_path=path)
        self.assertEqual(2, load_checkpoint(path).step)
        self.assertEqual(consts.EXIT_NUMERIC, NumericError.exit_code)

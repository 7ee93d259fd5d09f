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
# Unit tests for objectives.py
import collections
import logging
import sys
import unittest

import numpy as np

from koopman_uq import consts
from koopman_uq.diffcore.gradcheck import grad_check
from koopman_uq.diffcore.tape import Tape
from koopman_uq.exceptions import ConfigError, ContractError, ShapeError
from koopman_uq.koopman.model import (KoopmanArchitecture,
                                      KoopmanAutoencoder, decode, encode)
from koopman_uq.losses.objectives import (
    LossBreakdown, TrainingBatch, abs_deviation_loss, ae_loss,
    ensemble_loss_crps_proxy, ensemble_loss_var, lin_loss, orth_loss,
    pred_loss, single_model_loss, spread_adjusted_error, variance_loss)
from tests.koopman_uq.koopman.model_tests import linear_model

logging.basicConfig(stream=sys.stdout, level=logging.DEBUG)
logger = logging.getLogger('objectives_tests')


def random_model(rng, n=2, d=3, hidden=(3,), scale=0.5):
    arch = KoopmanArchitecture(n, d, hidden)
    params = collections.OrderedDict(
        (name, scale * rng.normal(size=shape))
        for name, shape in arch.param_shapes().items())
    params['K'] = np.eye(d) + 0.2 * rng.normal(size=(d, d))
    return KoopmanAutoencoder(arch, params)


def random_batch(rng, size=2, steps=3, n=2):
    return TrainingBatch(rng.normal(size=(size, steps + 1, n)))


def naive_terms(model, batch, dist):
    """
    Double-loop re-implementation of the pred, ae and lin sums
    """
    pred = ae = lin = 0.0
    for series in batch.series:
        z = encode(model, series[0])
        for t, x in enumerate(series):
            ae += dist(x - decode(model, encode(model, x)))
            if t == 0:
                continue
            z = model.K @ z
            pred += dist(x - decode(model, z))
            lin += dist(encode(model, x) - z)
    return pred, ae, lin


def sq_l2(v):
    return float(np.sum(np.square(v)))


def l1(v):
    return float(np.sum(np.abs(v)))


class SingleModelLossTests(unittest.TestCase):
    """
    Tests for pred, ae, lin, orth and their weighted combination
    """

    def test_exact_model_gives_zero(self):
        batch = TrainingBatch(np.ones((2, 4, 2)) * 0.7)
        model = linear_model(2)
        self.assertEqual(0.0, float(pred_loss(model, batch)))
        self.assertEqual(0.0, float(ae_loss(model, batch)))
        self.assertEqual(0.0, float(lin_loss(model, batch)))

    def test_pred_step_series(self):
        batch = TrainingBatch(np.array([[[0.0], [1.0]]]))
        self.assertEqual(1.0, float(pred_loss(linear_model(1), batch)))
        self.assertEqual(1.0, float(pred_loss(linear_model(1), batch,
                                              consts.NORM_L1)))

    def test_zero_decoder(self):
        angles = np.linspace(0.0, 2.0, 6).reshape(2, 3)
        batch = TrainingBatch(np.stack([np.cos(angles), np.sin(angles)],
                                       axis=-1))
        model = linear_model(2)
        params = model.numpy_params()
        params['decoder.0.weight'] = np.zeros((2, 2))
        model = KoopmanAutoencoder(model.arch, params)
        self.assertAlmostEqual(6.0, float(ae_loss(model, batch)), places=12)

    def test_lin_scalar(self):
        batch = TrainingBatch(np.array([[[1.0], [2.0]]]))
        self.assertEqual(0.0, float(lin_loss(linear_model(1, K=[[2.0]]),
                                             batch)))
        self.assertEqual(1.0, float(lin_loss(linear_model(1, K=[[1.0]]),
                                             batch)))

    def test_orth(self):
        self.assertEqual(0.0, float(orth_loss(np.eye(4))))
        self.assertEqual(18.0, float(orth_loss(2.0 * np.eye(2))))
        c, s = np.cos(0.3), np.sin(0.3)
        self.assertAlmostEqual(0.0, float(orth_loss(np.array([[c, -s],
                                                               [s, c]]))),
                               places=14)
        with self.assertRaises(ShapeError):
            orth_loss(np.ones((2, 3)))

    def test_naive_oracle(self):
        rng = np.random.default_rng(21)
        for norm, dist in ((consts.NORM_SQ_L2, sq_l2), (consts.NORM_L1, l1)):
            model = random_model(rng)
            batch = random_batch(rng)
            pred, ae, lin = naive_terms(model, batch, dist)
            self.assertAlmostEqual(1.0, float(pred_loss(model, batch, norm))
                                   / pred, places=10)
            self.assertAlmostEqual(1.0, float(ae_loss(model, batch, norm))
                                   / ae, places=10)
            self.assertAlmostEqual(1.0, float(lin_loss(model, batch, norm))
                                   / lin, places=10)

    def test_breakdown_arithmetic(self):
        self.assertEqual(0.0, LossBreakdown(0.0, 0.0, 0.0, 0.0, 0.5).total)
        self.assertEqual(8.0, LossBreakdown(1.0, 2.0, 3.0, 4.0, 0.5).total)

    def test_total_is_sum_of_ops(self):
        rng = np.random.default_rng(4)
        model = random_model(rng)
        batch = random_batch(rng)
        bd = single_model_loss(model, batch, alpha=0.3)
        expected = pred_loss(model, batch) + ae_loss(model, batch) + \
            lin_loss(model, batch) + 0.3 * orth_loss(model.K)
        self.assertEqual(expected, bd.total)
        self.assertEqual(bd.total, bd.recombined_total())
        self.assertEqual((2, 3, 2), bd.predictions.shape)

    def test_negative_alpha(self):
        rng = np.random.default_rng(4)
        with self.assertRaises(ConfigError):
            single_model_loss(random_model(rng), random_batch(rng), -0.1)

    def test_batch_order_invariance(self):
        rng = np.random.default_rng(9)
        model = random_model(rng)
        series = rng.normal(size=(4, 3, 2))
        first = single_model_loss(model, TrainingBatch(series))
        second = single_model_loss(model, TrainingBatch(series[::-1]))
        self.assertAlmostEqual(1.0, second.total / first.total, places=12)

    def test_batch_validation(self):
        with self.assertRaises(ShapeError):
            TrainingBatch(np.ones((2, 3)))
        with self.assertRaises(ContractError):
            TrainingBatch(np.ones((2, 1, 3)))


class EnsembleTermTests(unittest.TestCase):
    """
    Tests for the ensemble-coupled variance and absolute deviation terms
    """

    def test_variance_examples(self):
        self.assertEqual(0.0, float(variance_loss(np.ones((3, 2, 2)))))
        self.assertEqual(-1.0, float(variance_loss(
            np.array([1.0, 3.0]).reshape(2, 1, 1))))
        self.assertEqual(-2.25, float(variance_loss(
            np.array([0.0, 0.0, 3.0, 3.0]).reshape(4, 1, 1))))

    def test_abs_deviation_examples(self):
        self.assertEqual(0.0, float(abs_deviation_loss(np.ones((3, 2, 2)))))
        self.assertEqual(-0.25, float(abs_deviation_loss(
            np.array([0.0, 1.0]).reshape(2, 1, 1))))
        self.assertAlmostEqual(-2.0 / 3.0, float(abs_deviation_loss(
            np.array([0.0, 0.0, 3.0]).reshape(3, 1, 1))), places=15)

    def test_terms_non_positive(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            preds = rng.normal(size=(rng.integers(1, 6), 3, 2))
            self.assertLessEqual(float(variance_loss(preds)), 0.0)
            self.assertLessEqual(float(abs_deviation_loss(preds)), 0.0)

    def test_list_and_array_agree(self):
        rng = np.random.default_rng(13)
        preds = rng.normal(size=(3, 4, 2))
        self.assertEqual(float(variance_loss(preds)),
                         float(variance_loss(list(preds))))

    def test_empty_members(self):
        with self.assertRaises(ContractError):
            variance_loss([])

    def test_variance_decomposition(self):
        """
        mean error = mean spread + error of the mean, per sample
        """
        rng = np.random.default_rng(14)
        for _ in range(1000):
            size = rng.integers(1, 9)
            preds = rng.normal(size=(size, 3)) * rng.uniform(0.1, 10.0)
            truth = rng.normal(size=3)
            mean = preds.mean(axis=0)
            lhs = np.mean(np.sum(np.square(preds - truth), axis=-1))
            rhs = np.mean(np.sum(np.square(preds - mean), axis=-1)) + \
                np.sum(np.square(mean - truth))
            self.assertLessEqual(abs(lhs - rhs), 1e-10 * abs(lhs))

    def test_bounded_for_lambda_at_most_one(self):
        rng = np.random.default_rng(15)
        for _ in range(1000):
            preds = rng.normal(size=(rng.integers(1, 9), 4, 2)) * 5.0
            truth = rng.normal(size=(4, 2))
            for lam in (0.0, 0.5, 1.0):
                values = spread_adjusted_error(preds, truth, lam)
                self.assertGreaterEqual(values.min(), -1e-12)

    def test_opposite_pairs_diverge(self):
        a = 1e3
        preds = np.array([[a], [-a]])
        value = float(spread_adjusted_error(preds, np.zeros(1), 1.5))
        self.assertLess(value, -1e5)

    def test_sandwich_bound(self):
        rng = np.random.default_rng(16)
        for _ in range(1000):
            size = rng.integers(1, 10)
            x = rng.normal(size=size) * rng.uniform(0.1, 10.0)
            mean_dev = np.mean(np.abs(x - x.mean()))
            pairwise = np.sum(np.abs(x[:, None] - x[None, :])) / size ** 2
            self.assertLessEqual(mean_dev, pairwise + 1e-12)
            self.assertLessEqual(pairwise, 2.0 * mean_dev + 1e-12)


class EnsembleLossTests(unittest.TestCase):
    """
    Tests for ensemble_loss_var and ensemble_loss_crps_proxy
    """

    def setUp(self):
        rng = np.random.default_rng(30)
        self.members = [random_model(rng) for _ in range(3)]
        self.batch = random_batch(rng)

    def test_lambda_zero_is_mean_of_members(self):
        bd = ensemble_loss_var(self.members, self.batch, alpha=0.1, lam=0.0)
        totals = [single_model_loss(m, self.batch, 0.1).total
                  for m in self.members]
        self.assertAlmostEqual(sum(totals) / 3.0, bd.total, places=12)

    def test_compositional_oracle(self):
        bd = ensemble_loss_var(self.members, self.batch, alpha=0.1, lam=0.7)
        parts = [single_model_loss(m, self.batch, 0.1) for m in self.members]
        var = variance_loss([p.predictions for p in parts])
        expected = sum(p.total for p in parts) * (1.0 / 3) + 0.7 * var + \
            0.7 * 0.0
        self.assertEqual(expected, bd.total)
        self.assertEqual(var, bd.var)
        self.assertAlmostEqual(bd.total, bd.recombined_total(), places=12)

    def test_opposite_pair(self):
        batch = TrainingBatch(np.array([[[1.0], [0.0]]]))
        for a in (1.0, 10.0, 100.0):
            members = [linear_model(1, K=[[a]]), linear_model(1, K=[[-a]])]
            for lam in (0.0, 0.5, 1.0, 1.5):
                bd = ensemble_loss_var(members, batch, lam=lam,
                                       allow_divergent=True)
                self.assertAlmostEqual((1.0 - lam) * a * a,
                                       bd.pred + lam * bd.var, places=9)

    def test_lambda_above_one_refused(self):
        with self.assertRaises(ConfigError) as cm:
            ensemble_loss_var(self.members, self.batch, lam=1.2)
        self.assertIn('the training procedure will diverge',
                      str(cm.exception))
        ensemble_loss_var(self.members, self.batch, lam=1.2,
                          allow_divergent=True)

    def test_negative_lambda_refused(self):
        with self.assertRaises(ConfigError):
            ensemble_loss_var(self.members, self.batch, lam=-0.1)
        with self.assertRaises(ConfigError):
            ensemble_loss_crps_proxy(self.members, self.batch, lam=-0.1)

    def test_member_order_invariance(self):
        first = ensemble_loss_var(self.members, self.batch, lam=0.5)
        second = ensemble_loss_var(self.members[::-1], self.batch, lam=0.5)
        self.assertAlmostEqual(1.0, second.total / first.total, places=12)
        first = ensemble_loss_crps_proxy(self.members, self.batch)
        second = ensemble_loss_crps_proxy(self.members[::-1], self.batch)
        self.assertAlmostEqual(1.0, second.total / first.total, places=12)

    def test_crps_proxy_identical_members(self):
        member = self.members[0]
        bd = ensemble_loss_crps_proxy([member, member], self.batch)
        single = single_model_loss(member, self.batch, consts.ALPHA,
                                   consts.NORM_L1)
        self.assertEqual(0.0, bd.abs_dev)
        self.assertAlmostEqual(2.0 * single.total, bd.total, places=12)

    def test_crps_proxy_lambda_zero(self):
        bd = ensemble_loss_crps_proxy(self.members, self.batch, lam=0.0)
        totals = [single_model_loss(m, self.batch, consts.ALPHA,
                                    consts.NORM_L1).total
                  for m in self.members]
        self.assertAlmostEqual(sum(totals), bd.total, places=12)

    def test_crps_proxy_compositional_oracle(self):
        bd = ensemble_loss_crps_proxy(self.members, self.batch, alpha=0.2,
                                      lam=0.8)
        parts = [single_model_loss(m, self.batch, 0.2, consts.NORM_L1)
                 for m in self.members]
        abs_dev = abs_deviation_loss([p.predictions for p in parts])
        expected = sum(p.total for p in parts) * 1.0 + 0.8 * 0.0 + \
            0.8 * abs_dev
        self.assertEqual(expected, bd.total)


class LossGradientTests(unittest.TestCase):
    """
    Finite difference checks of every loss on small random instances,
    coordinates whose stencil crosses a |.| kink are not scored
    """
    EPS = 1e-4
    TOLERANCE = 1e-4
    INSTANCES = 20
    ZERO_FLOOR = 1e-6

    def _check(self, build, seed=40):
        rng = np.random.default_rng(seed)
        for instance in range(self.INSTANCES):
            tape = Tape()
            tape.set_output(build(rng, tape))
            err = grad_check(tape, eps=self.EPS, skip_kinks=True,
                             zero_floor=self.ZERO_FLOOR)
            self.assertLess(err, self.TOLERANCE,
                            'instance %d of seed %d' % (instance, seed))

    def _bound_model(self, rng, tape, prefix=''):
        n = int(rng.integers(1, 4))
        return random_model(rng, n=n, d=int(rng.integers(1, 5))).bind(
            tape, prefix), n

    def _single(self, loss, norm):
        def build(rng, tape):
            model, n = self._bound_model(rng, tape)
            return loss(model, random_batch(
                rng, steps=int(rng.integers(1, 5)), n=n), norm)
        return build

    def test_pred_loss(self):
        self._check(self._single(pred_loss, consts.NORM_SQ_L2))
        self._check(self._single(pred_loss, consts.NORM_L1))

    def test_ae_loss(self):
        self._check(self._single(ae_loss, consts.NORM_SQ_L2))
        self._check(self._single(ae_loss, consts.NORM_L1))

    def test_lin_loss(self):
        self._check(self._single(lin_loss, consts.NORM_SQ_L2))
        self._check(self._single(lin_loss, consts.NORM_L1))

    def test_orth_loss(self):
        self._check(lambda rng, tape: orth_loss(
            tape.param('K', rng.normal(size=(3, 3)))))

    def test_single_model_loss(self):
        def build(rng, tape):
            model, n = self._bound_model(rng, tape)
            return single_model_loss(model, random_batch(rng, n=n),
                                     alpha=0.5).total
        self._check(build)

    def test_variance_loss(self):
        self._check(lambda rng, tape: variance_loss(
            [tape.param('p%d' % j, rng.normal(size=(2, 3)))
             for j in range(3)]))

    def test_abs_deviation_loss(self):
        self._check(lambda rng, tape: abs_deviation_loss(
            tape.param('p', rng.normal(size=(4, 2, 3)))))

    def _ensemble(self, rng, tape):
        size = int(rng.integers(2, 4))
        n = int(rng.integers(1, 4))
        d = int(rng.integers(1, 5))
        members = [random_model(rng, n=n, d=d).bind(tape, 'm%d.' % j)
                   for j in range(size)]
        return members, random_batch(rng, steps=int(rng.integers(1, 4)),
                                     n=n)

    def test_ensemble_loss_var(self):
        def build(rng, tape):
            members, batch = self._ensemble(rng, tape)
            return ensemble_loss_var(members, batch, alpha=0.1,
                                     lam=0.9).total
        self._check(build)

    def test_ensemble_loss_crps_proxy(self):
        def build(rng, tape):
            members, batch = self._ensemble(rng, tape)
            return ensemble_loss_crps_proxy(members, batch, alpha=0.1).total
        self._check(build)

    def test_members_receive_coupled_gradient(self):
        """
        With lambda > 0 a member's gradient depends on the other members
        """
        rng = np.random.default_rng(50)
        models = [random_model(rng) for _ in range(2)]
        batch = random_batch(rng)

        def grads_of_first(second):
            tape = Tape()
            bound = [models[0].bind(tape, 'm0.'), second.bind(tape, 'm1.')]
            tape.set_output(ensemble_loss_var(bound, batch, lam=0.5).total)
            return tape.backward()['m0.K']

        other = random_model(rng)
        self.assertFalse(np.allclose(grads_of_first(models[1]),
                                     grads_of_first(other)))

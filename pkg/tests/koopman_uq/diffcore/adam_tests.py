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
# Unit tests for adam.py
import logging
import sys
import unittest

import numpy as np

from koopman_uq.diffcore.adam import AdamState, adam_step
from koopman_uq.exceptions import ConfigError, ShapeError

logging.basicConfig(stream=sys.stdout, level=logging.DEBUG)
logger = logging.getLogger('adam_tests')


class AdamTests(unittest.TestCase):
    """
    Tests for the bias-corrected Adam update
    """

    def setUp(self):
        self.params = dict(w=np.array([1.0, -2.0, 0.5]),
                           b=np.array([[0.0, 3.0]]))
        self.state = AdamState.create(self.params, lr=0.001)

    def test_first_step_moves_by_lr(self):
        grads = dict(w=np.array([4.0, -0.5, 100.0]),
                     b=np.array([[-2.0, 0.3]]))
        new_params, state = adam_step(self.state, self.params, grads)
        for name in self.params:
            np.testing.assert_allclose(
                -0.001 * np.sign(grads[name]),
                new_params[name] - self.params[name], rtol=1e-5)
        self.assertEqual(1, state.step)

    def test_zero_gradient(self):
        grads = dict((k, np.zeros_like(v)) for k, v in self.params.items())
        new_params, state = adam_step(self.state, self.params, grads)
        for name in self.params:
            np.testing.assert_array_equal(self.params[name], new_params[name])
        self.assertEqual(1, state.step)

    def test_constant_gradient_displacements_non_increasing(self):
        grads = dict(w=np.array([0.1, -3.0, 1e-3]),
                     b=np.array([[5.0, -5.0]]))
        p1, s1 = adam_step(self.state, self.params, grads)
        p2, s2 = adam_step(s1, p1, grads)
        for name in self.params:
            first = np.abs(p1[name] - self.params[name])
            second = np.abs(p2[name] - p1[name])
            self.assertTrue(np.all(second <= first + 1e-15))
        self.assertEqual(2, s2.step)

    def test_inputs_not_mutated(self):
        before = dict((k, v.copy()) for k, v in self.params.items())
        grads = dict((k, np.ones_like(v)) for k, v in self.params.items())
        adam_step(self.state, self.params, grads)
        for name in before:
            np.testing.assert_array_equal(before[name], self.params[name])
            self.assertFalse(np.any(self.state.m[name]))
        self.assertEqual(0, self.state.step)

    def test_shape_mismatch(self):
        grads = dict(w=np.ones(4), b=np.ones((1, 2)))
        with self.assertRaises(ShapeError):
            adam_step(self.state, self.params, grads)

    def test_missing_param(self):
        with self.assertRaises(ShapeError):
            adam_step(self.state, dict(w=self.params['w']),
                      dict(w=np.ones(3)))

    def test_bad_hyperparameters(self):
        with self.assertRaises(ConfigError):
            AdamState.create(self.params, lr=0.0)
        with self.assertRaises(ConfigError):
            AdamState.create(self.params, beta1=1.0)
        with self.assertRaises(ConfigError):
            AdamState.create(self.params, eps=-1.0)

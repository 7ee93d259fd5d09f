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
"""
Bias-corrected Adam over named float64 parameter arrays.
"""
import collections
import logging

import numpy as np

from koopman_uq import consts
from koopman_uq.exceptions import ConfigError, ShapeError

logger = logging.getLogger('adam')


class AdamState(object):
    """
    Step count, moment accumulators and hyperparameters of an Adam optimizer
    """
    def __init__(self, m, v, step=0, lr=consts.ADAM_LR,
                 beta1=consts.ADAM_BETA1, beta2=consts.ADAM_BETA2,
                 eps=consts.ADAM_EPS):
        """
        Constructor
        :param m: dict of param name to first-moment array
        :param v: dict of param name to second-moment array
        :param step: number of updates applied so far
        :param lr: the learning rate (> 0)
        :param beta1: first-moment decay in [0, 1)
        :param beta2: second-moment decay in [0, 1)
        :param eps: denominator guard (> 0)
        """
        if not lr > 0:
            raise ConfigError('lr', 'learning rate must be > 0, got %s' % lr)
        for key, beta in (('beta1', beta1), ('beta2', beta2)):
            if not 0.0 <= beta < 1.0:
                raise ConfigError(key, 'must lie in [0, 1), got %s' % beta)
        if not eps > 0:
            raise ConfigError('eps', 'must be > 0, got %s' % eps)
        if step < 0:
            raise ConfigError('step', 'must be >= 0, got %s' % step)
        if set(m) != set(v):
            raise ShapeError('moments', 'first and second moments name '
                                        'different parameters')
        for name in m:
            if np.shape(m[name]) != np.shape(v[name]):
                raise ShapeError(name, 'moment shapes differ')
        self.m = collections.OrderedDict(m)
        self.v = collections.OrderedDict(v)
        self.step = int(step)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)

    @classmethod
    def create(cls, params, **hyper):
        zeros = collections.OrderedDict(
            (name, np.zeros_like(value, dtype=np.float64))
            for name, value in params.items())
        return cls(zeros, collections.OrderedDict(
            (name, z.copy()) for name, z in zeros.items()), **hyper)

    def hyperparameters(self):
        return dict(lr=self.lr, beta1=self.beta1, beta2=self.beta2,
                    eps=self.eps)


def adam_step(state, params, grads):
    """
    Applies one bias-corrected Adam update
    :param state: the AdamState before the update
    :param params: dict of name to parameter array
    :param grads: dict of name to gradient array, congruent to params
    :return: tuple of (new params dict, new AdamState); inputs are untouched
    :raises ShapeError: when names or shapes do not match
    """
    if set(params) != set(state.m):
        raise ShapeError('params', 'parameters %s do not match optimizer '
                                   'state %s' % (sorted(params),
                                                 sorted(state.m)))
    step = state.step + 1
    bc1 = 1.0 - state.beta1 ** step
    bc2 = 1.0 - state.beta2 ** step
    step_size = state.lr / bc1

    new_params = collections.OrderedDict()
    new_m = collections.OrderedDict()
    new_v = collections.OrderedDict()
    for name, value in params.items():
        if name not in grads:
            raise ShapeError(name, 'missing gradient')
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != np.shape(value) or g.shape != state.m[name].shape:
            raise ShapeError(name, 'gradient shape %s, parameter shape %s' % (
                g.shape, np.shape(value)))
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v * (1.0 / bc2)) + state.eps
        new_params[name] = value - step_size * m / denom
        new_m[name] = m
        new_v[name] = v
    logger.debug('Adam step - [%d] over [%d] arrays', step, len(new_params))
    return new_params, AdamState(new_m, new_v, step=step,
                                 **state.hyperparameters())

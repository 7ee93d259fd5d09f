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
Synthetic dynamical systems:
- linear: dx/dt = A x, propagated exactly with the matrix exponential
- damped_oscillator: x'' = -omega^2 x - 2 zeta x', underdamped closed form
- van_der_pol: x'' = mu (1 - x^2) x' - x, fixed-step RK4 with substeps
"""
import collections
import logging

import numpy as np
from scipy.linalg import expm

from koopman_uq import consts
from koopman_uq.dataio.dataset import TimeSeriesDataset
from koopman_uq.exceptions import ConfigError

logger = logging.getLogger('systems')

DEFAULT_PARAMS = {
    consts.SYSTEM_LINEAR: dict(matrix=[[-0.1, 1.0], [-1.0, -0.1]]),
    consts.SYSTEM_DAMPED_OSCILLATOR: dict(omega=1.0, zeta=0.1),
    consts.SYSTEM_VAN_DER_POL: dict(mu=1.0),
}


class SystemSpec(collections.namedtuple(
        'SystemSpec', ['kind', 'params', 'noise_std', 'seed', 'noise_seed'])):
    """
    A dynamical system, its observation noise and the generation seed.
    noise_seed overrides the stream derived from seed for the noise only
    """
    __slots__ = ()

    def __new__(cls, kind=consts.SYSTEM_DAMPED_OSCILLATOR, params=None,
                noise_std=consts.DATA_NOISE_STD, seed=consts.SEED,
                noise_seed=None):
        if kind not in consts.SYSTEMS:
            raise ConfigError('system', '%r not one of %s' % (
                kind, consts.SYSTEMS))
        merged = dict(DEFAULT_PARAMS[kind])
        merged.update(params or dict())
        if not noise_std >= 0:
            raise ConfigError('noise_std', 'must be >= 0, got %s' % noise_std)
        if seed < 0:
            raise ConfigError('seed', 'must be unsigned, got %s' % seed)
        spec = super(SystemSpec, cls).__new__(
            cls, kind, merged, float(noise_std), int(seed), noise_seed)
        spec.validate()
        return spec

    def validate(self):
        p = self.params
        if self.kind == consts.SYSTEM_LINEAR:
            matrix = np.asarray(p['matrix'], dtype=np.float64)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or \
                    matrix.shape[0] < 1:
                raise ConfigError('matrix', 'must be square, got shape %s' % (
                    matrix.shape,))
            if not np.all(np.isfinite(matrix)):
                raise ConfigError('matrix', 'must be finite')
        elif self.kind == consts.SYSTEM_DAMPED_OSCILLATOR:
            if not p['omega'] > 0:
                raise ConfigError('omega', 'must be > 0, got %s' % p['omega'])
            if not p['zeta'] >= 0:
                raise ConfigError('zeta', 'damping must be >= 0, got %s' % (
                    p['zeta'],))
            if not p['zeta'] < p['omega']:
                raise ConfigError('zeta', 'only the underdamped case '
                                          'zeta < omega is supported')
        elif not np.isfinite(p['mu']) or p['mu'] < 0:
            raise ConfigError('mu', 'must be finite and >= 0, got %s' % (
                p['mu'],))

    @property
    def state_dim(self):
        if self.kind == consts.SYSTEM_LINEAR:
            return len(self.params['matrix'])
        return 2

    @property
    def channels(self):
        if self.kind == consts.SYSTEM_LINEAR:
            return ['x%d' % c for c in range(self.state_dim)]
        return ['x', 'v']

    def describe(self):
        return '%s%s noise=%s seed=%s' % (
            self.kind, sorted(self.params.items()), self.noise_std, self.seed)


class InitDistribution(collections.namedtuple('InitDistribution',
                                              ['kind', 'scale'])):
    """
    Initial states: uniform on [-scale, scale]^n or normal with std scale
    """
    __slots__ = ()

    def __new__(cls, kind='uniform', scale=1.0):
        if kind not in ('uniform', 'normal'):
            raise ConfigError('init', '%r not one of uniform, normal' % kind)
        if not scale > 0:
            raise ConfigError('init_scale', 'must be > 0, got %s' % scale)
        return super(InitDistribution, cls).__new__(cls, kind, float(scale))

    def sample(self, rng, count, dim):
        if self.kind == 'uniform':
            return rng.uniform(-self.scale, self.scale, size=(count, dim))
        return rng.normal(0.0, self.scale, size=(count, dim))


def linear_trajectory(matrix, x0, times):
    """
    x(t) = expm(A t) x0 for every t in times
    :param x0: (N, n) initial states
    :return: (N, len(times), n)
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    return np.stack([x0 @ expm(matrix * t).T for t in times], axis=1)


def oscillator_trajectory(omega, zeta, x0, times):
    """
    Underdamped closed form with omega_d = sqrt(omega^2 - zeta^2)
    :param x0: (N, 2) initial (position, velocity)
    :return: (N, len(times), 2)
    """
    pos, vel = x0[:, :1], x0[:, 1:]
    wd = np.sqrt(omega ** 2 - zeta ** 2)
    t = np.asarray(times, dtype=np.float64)[None, :]
    decay = np.exp(-zeta * t)
    cos, sin = np.cos(wd * t), np.sin(wd * t)
    x = decay * (pos * cos + (vel + zeta * pos) / wd * sin)
    v = decay * (vel * cos - (omega ** 2 * pos + zeta * vel) / wd * sin)
    return np.stack([x, v], axis=-1)


def van_der_pol_rhs(state, mu):
    x, v = state[..., 0], state[..., 1]
    return np.stack([v, mu * (1.0 - x * x) * v - x], axis=-1)


def rk_step(rhs, state, dt, *args):
    k1 = rhs(state, *args)
    k2 = rhs(state + dt * k1 / 2, *args)
    k3 = rhs(state + dt * k2 / 2, *args)
    k4 = rhs(state + dt * k3, *args)
    return state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def van_der_pol_trajectory(mu, x0, steps, dt, substeps=consts.VDP_SUBSTEPS):
    """
    RK4 at dt / substeps, sampled every dt
    :return: (N, steps + 1, 2)
    """
    h = dt / substeps
    states = [np.array(x0, dtype=np.float64)]
    state = states[0]
    for _ in range(steps):
        for _ in range(substeps):
            state = rk_step(van_der_pol_rhs, state, h, mu)
        states.append(state)
    return np.stack(states, axis=1)


def clean_trajectories(spec, x0, steps, dt):
    times = np.arange(steps + 1) * dt
    p = spec.params
    if spec.kind == consts.SYSTEM_LINEAR:
        return linear_trajectory(p['matrix'], x0, times)
    if spec.kind == consts.SYSTEM_DAMPED_OSCILLATOR:
        return oscillator_trajectory(p['omega'], p['zeta'], x0, times)
    return van_der_pol_trajectory(p['mu'], x0, steps, dt)


def generate(spec, n_series=consts.DATA_N_SERIES, steps=consts.DATA_STEPS,
             dt=consts.DATA_DT, init=None):
    """
    Generates N noisy series of T + 1 states
    :param spec: the SystemSpec
    :param n_series: N >= 1
    :param steps: T >= 1
    :param dt: sampling interval > 0
    :param init: the InitDistribution, uniform on [-1, 1] when None
    :return: a TimeSeriesDataset, bitwise reproducible from the system seeds
    """
    if n_series < 1:
        raise ConfigError('n_series', 'must be >= 1, got %s' % n_series)
    if steps < 1:
        raise ConfigError('steps', 'must be >= 1, got %s' % steps)
    if not dt > 0:
        raise ConfigError('dt', 'must be > 0, got %s' % dt)
    init = init or InitDistribution()
    init_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(2)
    if spec.noise_seed is not None:
        noise_seq = np.random.SeedSequence(spec.noise_seed)

    x0 = init.sample(np.random.default_rng(init_seq), n_series,
                     spec.state_dim)
    data = clean_trajectories(spec, x0, steps, dt)
    if not np.all(np.isfinite(data)):
        raise ConfigError('system', '%s blows up within %d steps' % (
            spec.describe(), steps))
    if spec.noise_std > 0:
        noise = np.random.default_rng(noise_seq).normal(
            0.0, spec.noise_std, size=data.shape)
        data = data + noise
    logger.info('Generated [%d] series of [%d] steps from [%s]', n_series,
                steps, spec.describe())
    return TimeSeriesDataset(data, spec.channels, dt, spec.describe())

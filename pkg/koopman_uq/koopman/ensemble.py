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
Deep ensembles of Koopman autoencoders and their forecast distributions.
"""
import logging

import numpy as np

from koopman_uq import consts
from koopman_uq.dataio.normalize import Normalizer
from koopman_uq.exceptions import ConfigError, ContractError, ShapeError
from koopman_uq.koopman.model import forecast, init_model
from koopman_uq.utils.workers import ordered_map

logger = logging.getLogger('ensemble')


class Ensemble(object):
    """
    M dimensionally identical members sharing normalization statistics
    """
    def __init__(self, members, normalizer=None,
                 regime=consts.REGIME_INDEPENDENT, lam=0.0):
        """
        Constructor
        :param members: list of KoopmanAutoencoder
        :param normalizer: the Normalizer used at train time (identity when
                           None)
        :param regime: independent|variance|crps_proxy
        :param lam: the diversity weight lambda used in training
        """
        members = list(members)
        if not members:
            raise ContractError('members', 'an ensemble needs M >= 1 members')
        arch = members[0].arch
        for index, member in enumerate(members):
            if member.arch != arch:
                raise ShapeError('members[%d]' % index,
                                 'architecture %s differs from %s' % (
                                     member.arch, arch))
        if regime not in consts.REGIMES:
            raise ConfigError('regime', '%r not one of %s' % (
                regime, consts.REGIMES))
        if normalizer is None:
            normalizer = Normalizer.identity(arch.state_dim)
        if normalizer.channels != arch.state_dim:
            raise ShapeError('normalization', '%d channels for n = %d' % (
                normalizer.channels, arch.state_dim))
        self.members = members
        self.normalizer = normalizer
        self.regime = regime
        self.lam = float(lam)

    @classmethod
    def create(cls, arch, size, seed, normalizer=None,
               regime=consts.REGIME_INDEPENDENT, lam=0.0):
        """
        Initializes member j from seed + j
        """
        if size < 1:
            raise ConfigError('ensemble_size', 'must be >= 1, got %s' % size)
        logger.info('Creating ensemble of [%d] members with base seed [%s]',
                    size, seed)
        return cls([init_model(arch, seed + j) for j in range(size)],
                   normalizer, regime, lam)

    @property
    def arch(self):
        return self.members[0].arch

    def __len__(self):
        return len(self.members)


class ForecastDistribution(object):
    """
    Member trajectories (M x [B x] H x n), their mean and per-scalar spread
    (standard deviation across members, divisor M - 1)
    """
    def __init__(self, members):
        members = np.asarray(members, dtype=np.float64)
        if members.ndim < 3 or members.shape[0] < 1:
            raise ShapeError('members', 'expected (M, [B,] H, n), got %s' % (
                members.shape,))
        self.members = members
        self.mean = members.mean(axis=0)
        size = members.shape[0]
        if size > 1:
            spread = members.std(axis=0, ddof=1)
            coincide = np.all(members == members[0], axis=0)
            self.spread = np.where(coincide, 0.0, spread)
        else:
            self.spread = np.zeros_like(self.mean)

    @property
    def size(self):
        return self.members.shape[0]

    @property
    def horizon(self):
        return self.members.shape[-2]

    def map(self, func):
        """
        :return: a new distribution built from func(members), e.g. to invert
                 the normalization
        """
        return ForecastDistribution(func(self.members))


def ensemble_forecast(ensemble, x0, horizon, workers=None):
    """
    Forecasts every member from x0 (normalized space)
    :param ensemble: an Ensemble or a sequence of KoopmanAutoencoder
    :param x0: (n,) or (B, n)
    :param horizon: H >= 1
    :param workers: pool size, None for the default policy
    :return: a ForecastDistribution, members reduced in member order
    """
    members = getattr(ensemble, 'members', ensemble)
    members = list(members) if members is not None else list()
    if not members:
        raise ContractError('ensemble', 'cannot forecast with an empty '
                                        'ensemble')
    outputs = ordered_map(lambda member: forecast(member, x0, horizon),
                          members, workers)
    return ForecastDistribution(np.stack(outputs, axis=0))

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
import logging

import numpy as np

from koopman_uq.exceptions import ConfigError, ContractError, ShapeError

logger = logging.getLogger('dataset')


class TimeSeriesDataset(object):
    """
    N series of T + 1 regularly sampled states with n channels
    """
    def __init__(self, data, channels=None, dt=1.0, provenance=''):
        """
        Constructor
        :param data: (N, T+1, n) finite reals
        :param channels: n channel names, x0..x{n-1} when None
        :param dt: the sampling interval
        :param provenance: free-text tag
        """
        data = np.array(data, dtype=np.float64)
        if data.ndim != 3:
            raise ShapeError('data', 'expected (N, T+1, n), got %s' % (
                data.shape,))
        if data.shape[0] < 1 or data.shape[1] < 2 or data.shape[2] < 1:
            raise ShapeError('data', 'need N >= 1, T >= 1, n >= 1, got %s'
                             % (data.shape,))
        if not np.all(np.isfinite(data)):
            raise ContractError('data', 'dataset values must be finite')
        if channels is None:
            channels = ['x%d' % c for c in range(data.shape[2])]
        channels = [str(name) for name in channels]
        if len(channels) != data.shape[2]:
            raise ShapeError('channels', '%d names for %d channels' % (
                len(channels), data.shape[2]))
        if any('\n' in name for name in channels):
            raise ShapeError('channels', 'names may not contain newlines')
        data.setflags(write=False)
        self.data = data
        self.channels = channels
        self.dt = float(dt)
        self.provenance = provenance

    @property
    def n_series(self):
        return self.data.shape[0]

    @property
    def steps(self):
        """T, the number of transitions per series"""
        return self.data.shape[1] - 1

    @property
    def state_dim(self):
        return self.data.shape[2]

    def subset(self, data, tag):
        return TimeSeriesDataset(data, self.channels, self.dt,
                                 '%s|%s' % (self.provenance, tag))

    def summary(self):
        return dict(N=self.n_series, T=self.steps, n=self.state_dim,
                    dt=self.dt, channels=list(self.channels),
                    provenance=self.provenance)


def split_dataset(dataset, test_fraction):
    """
    Holds out the last ceil(test_fraction * N) series
    :return: tuple (train, test); test is None when test_fraction is 0
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigError('test_fraction', 'must lie in [0, 1), got %s' % (
            test_fraction,))
    held = int(np.ceil(test_fraction * dataset.n_series))
    if held == 0:
        return dataset, None
    if held >= dataset.n_series:
        raise ConfigError('test_fraction', 'holds out all %d series' % (
            dataset.n_series,))
    cut = dataset.n_series - held
    logger.info('Split [%d] series into [%d] train and [%d] test',
                dataset.n_series, cut, held)
    return (dataset.subset(dataset.data[:cut], 'train'),
            dataset.subset(dataset.data[cut:], 'test'))


def truncate(dataset, steps):
    """
    Keeps the first steps + 1 states of every series
    """
    if steps is None or steps >= dataset.steps:
        return dataset
    if steps < 1:
        raise ConfigError('train_horizon', 'must be >= 1, got %s' % steps)
    return dataset.subset(dataset.data[:, :steps + 1], 'T=%d' % steps)

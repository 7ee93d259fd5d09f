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

from koopman_uq.consts import NORM_MIN_STD
from koopman_uq.exceptions import ShapeError

logger = logging.getLogger('normalize')


class Normalizer(object):
    """
    Per-channel affine standardization frozen at training time
    """
    def __init__(self, mean, std):
        self.mean = np.array(mean, dtype=np.float64).reshape(-1)
        self.std = np.array(std, dtype=np.float64).reshape(-1)
        if self.mean.shape != self.std.shape:
            raise ShapeError('std', 'mean has %d channels, std has %d' % (
                self.mean.size, self.std.size))
        if not np.all(self.std > 0):
            raise ShapeError('std', 'every channel std must be > 0')

    @property
    def channels(self):
        return self.mean.size

    def apply(self, values):
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def invert(self, values):
        return np.asarray(values, dtype=np.float64) * self.std + self.mean

    @classmethod
    def identity(cls, channels):
        return cls(np.zeros(channels), np.ones(channels))


def fit_normalizer(dataset):
    """
    Fits per-channel mean and std (divisor count - 1) over every series and
    step of `dataset`; channels with std < 1e-12 get std 1
    :param dataset: a TimeSeriesDataset or an (N, T+1, n) array
    :return: a Normalizer
    """
    data = getattr(dataset, 'data', dataset)
    flat = np.asarray(data, dtype=np.float64).reshape(-1, np.shape(data)[-1])
    mean = flat.mean(axis=0)
    if flat.shape[0] > 1:
        std = flat.std(axis=0, ddof=1)
    else:
        std = np.zeros_like(mean)
    std = np.where(std < NORM_MIN_STD, 1.0, std)
    logger.info('Fitted normalizer mean - [%s] std - [%s]', mean, std)
    return Normalizer(mean, std)

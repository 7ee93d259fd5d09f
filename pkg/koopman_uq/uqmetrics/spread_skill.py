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
Spread-skill diagnostics. Spread is the member standard deviation of one
scalar (divisor M - 1), skill the absolute error of the mean prediction.
"""
import collections
import logging

import numpy as np

from koopman_uq.consts import SPREAD_SKILL_BINS
from koopman_uq.exceptions import ContractError

logger = logging.getLogger('spread_skill')

OVERCONFIDENT = 'overconfident'
CALIBRATED = 'calibrated'
UNDERCONFIDENT = 'underconfident'

SpreadSkillBin = collections.namedtuple('SpreadSkillBin',
                                        ['spread', 'skill', 'count'])


class SpreadSkillReport(object):
    """
    Binned spread/skill pairs with SSREL and SSRAT
    """
    spread_coordinate = 'rms'

    def __init__(self, bins, ssrel, ssrat, bin_count, sample_count):
        self.bins = bins
        self.ssrel = ssrel
        self.ssrat = ssrat
        self.bin_count = bin_count
        self.sample_count = sample_count

    @property
    def confidence(self):
        if np.isclose(self.ssrat, 1.0, rtol=0.0, atol=1e-9):
            return CALIBRATED
        return OVERCONFIDENT if self.ssrat < 1.0 else UNDERCONFIDENT

    def as_dict(self):
        return dict(
            ssrel=self.ssrel, ssrat=self.ssrat, bin_count=self.bin_count,
            sample_count=self.sample_count, confidence=self.confidence,
            spread_coordinate=self.spread_coordinate,
            bins=[b._asdict() for b in self.bins])


def _arrays(samples):
    if hasattr(samples, 'spreads'):
        return samples.spreads, samples.errors
    samples = list(samples)
    return (np.array([s.spread for s in samples], dtype=np.float64),
            np.array([s.error for s in samples], dtype=np.float64))


def spread_skill_report(samples, bin_count=SPREAD_SKILL_BINS):
    """
    Equal-width histogram of the samples over [0, max spread]; per bin the
    RMS spread, the RMS error (skill) and the count. Empty bins are dropped
    :param samples: ScoredSample list or a ScoreSummary
    :param bin_count: number of bins
    :return: a SpreadSkillReport where
             SSREL = sum_b (count_b / total) |spread_b - skill_b| and
             SSRAT = RMS spread / RMSE over all samples (unbinned)
    """
    spreads, errors = _arrays(samples)
    total = spreads.size
    if total < 1:
        raise ContractError('samples', 'spread-skill needs >= 1 sample')
    if bin_count < 1:
        raise ContractError('bin_count', 'must be >= 1, got %s' % bin_count)

    rms_spread = float(np.sqrt(np.mean(np.square(spreads))))
    rmse = float(np.sqrt(np.mean(np.square(errors))))
    max_spread = float(spreads.max())
    if max_spread <= 0.0:
        logger.warning('Every spread is zero, the ensemble is deterministic')
        bins = [SpreadSkillBin(0.0, rmse, total)]
        return SpreadSkillReport(bins, rmse, 0.0, bin_count, total)

    width = max_spread / bin_count
    index = np.minimum((spreads / width).astype(np.int64), bin_count - 1)
    bins = list()
    ssrel = 0.0
    for b in range(bin_count):
        mask = index == b
        count = int(np.count_nonzero(mask))
        if not count:
            continue
        spread_b = float(np.sqrt(np.mean(np.square(spreads[mask]))))
        skill_b = float(np.sqrt(np.mean(np.square(errors[mask]))))
        bins.append(SpreadSkillBin(spread_b, skill_b, count))
        ssrel += count / float(total) * abs(spread_b - skill_b)

    ssrat = rms_spread / rmse if rmse > 0 else float('inf')
    logger.info('Spread-skill over [%d] samples SSREL - [%s] SSRAT - [%s]',
                total, ssrel, ssrat)
    return SpreadSkillReport(bins, ssrel, ssrat, bin_count, total)

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

from koopman_uq.exceptions import ConfigError, ShapeError
from koopman_uq.koopman.ensemble import ensemble_forecast
from koopman_uq.uqmetrics.crps import score_forecasts
from koopman_uq.uqmetrics.spread_skill import spread_skill_report

logger = logging.getLogger('evaluation')


class EvaluationReport(object):
    """
    Scores of one ensemble on one split
    """
    def __init__(self, split, horizon, scores, spread_skill):
        self.split = split
        self.horizon = horizon
        self.scores = scores
        self.spread_skill = spread_skill

    @property
    def crps(self):
        return self.scores.crps_mean

    def as_dict(self):
        out = dict(split=self.split, horizon=self.horizon)
        out.update(self.scores.as_dict())
        out['spread_skill'] = self.spread_skill.as_dict()
        return out


def physical_forecast(ensemble, x0, horizon, workers=None):
    """
    Forecasts from physical-unit initial states, returning the distribution
    in physical units
    """
    normalizer = ensemble.normalizer
    dist = ensemble_forecast(ensemble, normalizer.apply(x0), horizon,
                             workers)
    return dist.map(normalizer.invert)


def evaluate_ensemble(ensemble, dataset, horizon=None, split='test',
                      bin_count=None, workers=None):
    """
    Forecasts every series of `dataset` from t = 0 and scores the forecast
    against steps 1..H in physical units
    :param horizon: H, the dataset length T when None
    :return: an EvaluationReport
    """
    if dataset.state_dim != ensemble.arch.state_dim:
        raise ShapeError('dataset', 'n = %d, checkpoint expects n = %d' % (
            dataset.state_dim, ensemble.arch.state_dim))
    horizon = dataset.steps if horizon is None else int(horizon)
    if not 1 <= horizon <= dataset.steps:
        raise ConfigError('horizon', 'must lie in [1, %d], got %s' % (
            dataset.steps, horizon))
    dist = physical_forecast(ensemble, dataset.data[:, 0, :], horizon,
                             workers)
    truth = np.asarray(dataset.data[:, 1:horizon + 1, :])
    scores = score_forecasts(dist, truth)
    kwargs = dict() if bin_count is None else dict(bin_count=bin_count)
    report = spread_skill_report(scores, **kwargs)
    logger.info('Evaluated [%s] split over [%d] series, H = [%d]: CRPS [%s] '
                'SSREL [%s] SSRAT [%s]', split, dataset.n_series, horizon,
                scores.crps_mean, report.ssrel, report.ssrat)
    return EvaluationReport(split, horizon, scores, report)

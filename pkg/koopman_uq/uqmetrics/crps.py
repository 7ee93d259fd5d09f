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
Continuous ranked probability score of an ensemble forecast.

For members y_1..y_M and observation y:
    CRPS = (1/M) sum_j |y - y_j| - (1/(2 M^2)) sum_j sum_k |y_j - y_k|
which equals the integral of (F(t) - 1{t >= y})^2 for the empirical CDF F.
A single member therefore scores its absolute error.
"""
import collections
import logging

import numpy as np

from koopman_uq.consts import CRPS_QUADRATURE_MAX_POINTS, \
    CRPS_QUADRATURE_STEP
from koopman_uq.exceptions import ContractError, NumericError, ShapeError

logger = logging.getLogger('crps')

ScoredSample = collections.namedtuple(
    'ScoredSample', ['spread', 'error', 'members', 'truth', 'crps'])


def _prepare(members, truth):
    members = np.asarray(members, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if members.ndim == 0 or members.shape[0] == 0:
        raise ContractError('members', 'CRPS needs at least one member')
    if members.shape[1:] != truth.shape:
        raise ShapeError('truth', 'members %s do not match truth %s' % (
            members.shape, truth.shape))
    if not (np.all(np.isfinite(members)) and np.all(np.isfinite(truth))):
        raise NumericError('crps', 'members and truth must be finite')
    return members, truth


def crps_ensemble(members, truth):
    """
    Ensemble CRPS, elementwise over any trailing axes
    :param members: (M,) or (M, ...) member values
    :param truth: scalar or (...) observations
    :return: float, or an array of shape (...)
    """
    members, truth = _prepare(members, truth)
    mae = np.mean(np.abs(members - truth), axis=0)
    pairwise = np.mean(np.abs(members[:, None] - members[None, :]),
                       axis=(0, 1))
    score = np.maximum(mae - 0.5 * pairwise, 0.0)
    return float(score) if score.ndim == 0 else score


def crps_vector(members, truth):
    """
    Multivariate CRPS summed over the last (channel) axis, correlations
    between channels ignored
    :param members: (M, n) or (M, ..., n)
    :param truth: (n,) or (..., n)
    :return: float, or an array of shape (...)
    """
    members = np.asarray(members, dtype=np.float64)
    if members.ndim < 2:
        raise ShapeError('members', 'need a channel axis, got shape %s' % (
            members.shape,))
    score = np.sum(np.asarray(crps_ensemble(members, truth)), axis=-1)
    return float(score) if score.ndim == 0 else score


def crps_quadrature(members, truth, step=CRPS_QUADRATURE_STEP):
    """
    Midpoint-rule integral of (F(t) - 1{t >= truth})^2 over
    [min(members, truth) - 1, max(members, truth) + 1]. The step widens
    so that at most CRPS_QUADRATURE_MAX_POINTS points are evaluated
    """
    if not step > 0:
        raise ValueError('step must be > 0, got %s' % step)
    members, truth = _prepare(np.reshape(members, -1), truth)
    low = min(members.min(), float(truth)) - 1.0
    high = max(members.max(), float(truth)) + 1.0
    step = max(step, (high - low) / CRPS_QUADRATURE_MAX_POINTS)
    count = int(np.ceil((high - low) / step))
    points = low + (np.arange(count) + 0.5) * step
    cdf = np.searchsorted(np.sort(members), points, side='right') / \
        float(members.size)
    heaviside = (points >= truth).astype(np.float64)
    return float(np.sum(np.square(cdf - heaviside)) * step)


def crps_integral_oracle(members, truth, step=CRPS_QUADRATURE_STEP):
    """
    Integral-form CRPS. The integrand is piecewise constant between the
    sorted breakpoints members + {truth}, so the closed form is exact; the
    quadrature at `step` is computed as a cross-check
    :return: the closed-form value
    """
    members, truth = _prepare(np.reshape(members, -1), truth)
    breakpoints = np.sort(np.append(members, float(truth)))
    ordered = np.sort(members)
    exact = 0.0
    for left, right in zip(breakpoints[:-1], breakpoints[1:]):
        width = right - left
        if width <= 0:
            continue
        cdf = np.searchsorted(ordered, left, side='right') / \
            float(members.size)
        heaviside = 1.0 if left >= truth else 0.0
        exact += (cdf - heaviside) ** 2 * width
    numeric = crps_quadrature(members, truth, step)
    span = breakpoints[-1] - breakpoints[0] + 2.0
    used = max(step, span / CRPS_QUADRATURE_MAX_POINTS)
    # each breakpoint cell is off by at most one step, the rest is exact
    tolerance = (members.size + 1) * used + 1e-9 * max(1.0, exact)
    logger.debug('CRPS oracle exact - [%s] quadrature - [%s] step - [%s]',
                 exact, numeric, used)
    if abs(numeric - exact) > tolerance:
        raise NumericError('crps_integral_oracle',
                           'quadrature %s disagrees with closed form %s' % (
                               numeric, exact))
    return exact


def score_forecasts(dist, truth):
    """
    Scores every (t, channel) scalar of a forecast distribution
    :param dist: a ForecastDistribution (members M x [B x] H x n)
    :param truth: observations shaped like dist.mean
    :return: a ScoreSummary
    """
    truth = np.asarray(truth, dtype=np.float64)
    if truth.shape != dist.mean.shape:
        raise ShapeError('truth', 'shape %s does not match forecast %s' % (
            truth.shape, dist.mean.shape))
    errors = np.abs(dist.mean - truth)
    scores = np.asarray(crps_ensemble(dist.members, truth))
    members = np.moveaxis(dist.members, 0, -1).reshape(-1, dist.size)
    samples = [ScoredSample(float(s), float(e), tuple(m), float(t), float(c))
               for s, e, m, t, c in zip(dist.spread.reshape(-1),
                                        errors.reshape(-1), members,
                                        truth.reshape(-1),
                                        scores.reshape(-1))]
    return ScoreSummary(samples, dist.spread.reshape(-1),
                        errors.reshape(-1), scores,
                        crps_vector(dist.members, truth))


class ScoreSummary(object):
    """
    Per-scalar samples plus aggregate scores
    crps_mean: mean over scalars of the per-scalar CRPS
    crps_channel_sum: mean over (series, t) of the channel-summed CRPS
    """
    def __init__(self, samples, spreads, errors, scores,
                 channel_sums=None):
        self.samples = samples
        self.spreads = np.asarray(spreads, dtype=np.float64)
        self.errors = np.asarray(errors, dtype=np.float64)
        scores = np.asarray(scores, dtype=np.float64)
        self.crps_mean = float(np.mean(scores))
        if channel_sums is None:
            channel_sums = np.sum(scores, axis=-1)
        self.crps_channel_sum = float(np.mean(channel_sums))
        self.mae = float(np.mean(self.errors))
        self.rmse = float(np.sqrt(np.mean(np.square(self.errors))))

    def as_dict(self):
        return dict(crps=self.crps_mean,
                    crps_channel_sum=self.crps_channel_sum, mae=self.mae,
                    rmse=self.rmse, samples=len(self.samples))

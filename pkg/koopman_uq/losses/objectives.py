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
Training objectives for single Koopman autoencoders and their ensembles.

Every reduction is a plain sum over series i and time steps, never an
average. Member predictions are stacked as (M, B, T, n). All functions work
on plain arrays or on tape-bound models, so the same code yields values,
gradients and oracles.
"""
import functools
import logging
import operator

import numpy as np

from koopman_uq import consts
from koopman_uq.diffcore import functional as F
from koopman_uq.diffcore.tape import real_array
from koopman_uq.exceptions import ConfigError, ContractError, ShapeError
from koopman_uq.koopman.model import (decode, decode_trajectory, encode,
                                      rollout_latent)

logger = logging.getLogger('objectives')


class TrainingBatch(object):
    """
    B normalized series of T + 1 steps each, anchored at t = 0
    """
    anchor = 0

    def __init__(self, series):
        series = real_array(series, name='series')
        if series.ndim != 3:
            raise ShapeError('series', 'expected (B, T+1, n), got %s' % (
                series.shape,))
        if series.shape[0] < 1 or series.shape[1] < 2:
            raise ContractError('series', 'need B >= 1 and T >= 1, got %s' % (
                series.shape,))
        self.series = series

    @property
    def size(self):
        return self.series.shape[0]

    @property
    def horizon(self):
        return self.series.shape[1] - 1

    @property
    def channels(self):
        return self.series.shape[2]

    @property
    def targets(self):
        return self.series[:, 1:, :]


class LossBreakdown(object):
    """
    Loss components and their weighted total
    total = pred + ae + lin + alpha * orth + lam * (var + abs_dev)

    Components are floats, or tape Nodes when computed on bound models.
    """
    FIELDS = ('pred', 'ae', 'lin', 'orth', 'var', 'abs_dev', 'total')

    def __init__(self, pred, ae, lin, orth, alpha, lam=0.0, var=0.0,
                 abs_dev=0.0, total=None, predictions=None):
        self.pred = pred
        self.ae = ae
        self.lin = lin
        self.orth = orth
        self.var = var
        self.abs_dev = abs_dev
        self.alpha = alpha
        self.lam = lam
        if total is None:
            total = pred + ae + lin + alpha * orth
        self.total = total
        self.predictions = predictions

    def as_dict(self):
        out = dict((name, F.as_float(getattr(self, name)))
                   for name in self.FIELDS)
        out['alpha'] = float(self.alpha)
        out['lam'] = float(self.lam)
        return out

    def recombined_total(self):
        """
        :return: the total recomputed from the float components
        """
        d = self.as_dict()
        return (d['pred'] + d['ae'] + d['lin'] + self.alpha * d['orth']
                + self.lam * (d['var'] + d['abs_dev']))


def _check_norm(norm):
    if norm not in consts.NORMS:
        raise ConfigError('norm', '%r not one of %s' % (norm, consts.NORMS))


def distance(a, b, norm):
    """
    Sum over every axis of the squared-L2 or L1 distance between a and b
    """
    diff = a - b
    if norm == consts.NORM_L1:
        return F.sum_(F.abs_(diff))
    return F.sum_(F.square(diff))


def _encode_series(model, batch):
    size, steps, channels = batch.series.shape
    phi = encode(model, batch.series.reshape(size * steps, channels))
    return F.reshape(phi, (size, steps, model.arch.latent_dim))


def _rollout(model, batch, phi):
    return rollout_latent(model, phi[:, 0, :], batch.horizon)


def pred_loss(model, batch, norm=consts.NORM_SQ_L2):
    """
    sum_i sum_{tau=1..T} dist(x_{i,tau}, psi(K^tau phi(x_{i,0})))
    """
    _check_norm(norm)
    phi = _encode_series(model, batch)
    predictions = decode_trajectory(model, _rollout(model, batch, phi))
    return distance(batch.targets, predictions, norm)


def ae_loss(model, batch, norm=consts.NORM_SQ_L2):
    """
    sum_i sum_{t=0..T} dist(x_{i,t}, psi(phi(x_{i,t})))
    """
    _check_norm(norm)
    return _ae_term(model, batch, _encode_series(model, batch), norm)


def _ae_term(model, batch, phi, norm):
    size, steps, channels = batch.series.shape
    recon = decode(model, F.reshape(
        phi, (size * steps, model.arch.latent_dim)))
    return distance(batch.series.reshape(size * steps, channels), recon,
                    norm)


def lin_loss(model, batch, norm=consts.NORM_SQ_L2):
    """
    sum_i sum_{tau=1..T} dist(phi(x_{i,tau}), K^tau phi(x_{i,0}))
    """
    _check_norm(norm)
    phi = _encode_series(model, batch)
    return distance(phi[:, 1:, :], _rollout(model, batch, phi), norm)


def orth_loss(K):
    """
    ||K K^T - I||_F^2
    """
    shape = F.shape_of(K)
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ShapeError('K', 'orthogonality penalty needs a square matrix, '
                              'got %s' % (tuple(shape),))
    return F.sum_(F.square(F.matmul(K, F.transpose(K)) - np.eye(shape[0])))


def single_model_loss(model, batch, alpha=consts.ALPHA,
                      norm=consts.NORM_SQ_L2):
    """
    L = L_pred + L_ae + L_lin + alpha L_orth, sharing one encoding of the
    batch between the terms
    :return: a LossBreakdown whose `predictions` hold the (B, T, n) forecasts
    """
    if alpha < 0:
        raise ConfigError('alpha', 'must be >= 0, got %s' % alpha)
    _check_norm(norm)
    phi = _encode_series(model, batch)
    latents = _rollout(model, batch, phi)
    predictions = decode_trajectory(model, latents)
    return LossBreakdown(
        pred=distance(batch.targets, predictions, norm),
        ae=_ae_term(model, batch, phi, norm),
        lin=distance(phi[:, 1:, :], latents, norm),
        orth=orth_loss(model.K),
        alpha=alpha,
        predictions=predictions)


def _stack_members(member_predictions):
    if isinstance(member_predictions, (list, tuple)):
        if not member_predictions:
            raise ContractError('member_predictions', 'need M >= 1 members')
        member_predictions = F.stack(member_predictions, axis=0)
    shape = F.shape_of(member_predictions)
    if len(shape) < 1 or shape[0] < 1:
        raise ContractError('member_predictions', 'need M >= 1 members')
    return member_predictions, shape[0]


def _deviations(member_predictions):
    stacked, size = _stack_members(member_predictions)
    return stacked - F.mean(stacked, axis=0), size


def variance_loss(member_predictions):
    """
    L_var = -(1/M) sum_j ||x_j - mean||^2 summed over every (i, t), with
    the biased divisor M so that lambda <= 1 bounds the objective for any M
    :param member_predictions: (M, ...) array/Node or a list of M members
    :return: a scalar <= 0
    """
    deviations, size = _deviations(member_predictions)
    return -F.sum_(F.square(deviations)) * (1.0 / size)


def abs_deviation_loss(member_predictions):
    """
    L_abs = -(1/2)(1/M) sum_j |x_j - mean| summed over every scalar
    """
    deviations, size = _deviations(member_predictions)
    return -F.sum_(F.abs_(deviations)) * (0.5 / size)


def spread_adjusted_error(member_predictions, truth, lam):
    """
    Per-sample (1/M) sum_j ||x_j - x||^2 - lam (1/M) sum_j ||x_j - mean||^2,
    norms taken over the last (channel) axis
    :param member_predictions: (M, ..., n) array
    :param truth: (..., n) array
    :return: array of shape (...)
    """
    preds = np.asarray(member_predictions, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    error = np.mean(np.sum(np.square(preds - truth), axis=-1), axis=0)
    spread = np.mean(np.sum(np.square(preds - preds.mean(axis=0)), axis=-1),
                     axis=0)
    return error - lam * spread


def _add_all(values):
    return functools.reduce(operator.add, values)


def combine_member_breakdowns(breakdowns, alpha, lam, var=0.0, abs_dev=0.0,
                              reduction='mean'):
    """
    Combines per-member breakdowns with an ensemble-coupled term
    :param breakdowns: one LossBreakdown per member
    :param alpha: orthogonality weight
    :param lam: weight of the coupled term
    :param var: L_var value (variance regime)
    :param abs_dev: L_abs value (CRPS-proxy regime)
    :param reduction: 'mean' (1/M sum_j) or 'sum' over members
    :return: the ensemble LossBreakdown, total = reduced member totals
             + lam * (var + abs_dev)
    """
    if not breakdowns:
        raise ContractError('breakdowns', 'need M >= 1 members')
    scale = 1.0 / len(breakdowns) if reduction == 'mean' else 1.0

    def reduce(name):
        return _add_all([getattr(bd, name) for bd in breakdowns]) * scale

    total = reduce('total') + lam * var + lam * abs_dev
    return LossBreakdown(pred=reduce('pred'), ae=reduce('ae'),
                         lin=reduce('lin'), orth=reduce('orth'), alpha=alpha,
                         lam=lam, var=var, abs_dev=abs_dev, total=total)


def check_variance_lambda(lam, allow_divergent=False):
    if lam < 0:
        raise ConfigError('lambda', 'must be >= 0, got %s' % lam)
    if lam > 1 and not allow_divergent:
        raise ConfigError('lambda', '%s rejected without allow_divergent: %s'
                          % (lam, consts.DIVERGENCE_MSG))


def _members(ensemble):
    members = list(getattr(ensemble, 'members', ensemble))
    if not members:
        raise ContractError('ensemble', 'need M >= 1 members')
    return members


def ensemble_loss_var(ensemble, batch, alpha=consts.ALPHA, lam=0.0,
                      allow_divergent=False):
    """
    L_var,lambda = (1/M) sum_j L(theta_j) + lambda L_var(Theta); lambda = 0
    is the independent objective
    :raises ConfigError: lambda < 0, or lambda > 1 without allow_divergent
    """
    check_variance_lambda(lam, allow_divergent)
    breakdowns = [single_model_loss(member, batch, alpha, consts.NORM_SQ_L2)
                  for member in _members(ensemble)]
    var = variance_loss([bd.predictions for bd in breakdowns])
    return combine_member_breakdowns(breakdowns, alpha, lam, var=var,
                                     reduction='mean')


def ensemble_loss_crps_proxy(ensemble, batch, alpha=consts.ALPHA,
                             lam=consts.CRPS_PROXY_LAMBDA):
    """
    L_CRPS = sum_j L_1(theta_j) + lambda L_abs(Theta), with every data-space
    distance in L_1 measured by the 1-norm (L_orth stays squared Frobenius)
    """
    if lam < 0:
        raise ConfigError('lambda', 'must be >= 0, got %s' % lam)
    breakdowns = [single_model_loss(member, batch, alpha, consts.NORM_L1)
                  for member in _members(ensemble)]
    abs_dev = abs_deviation_loss([bd.predictions for bd in breakdowns])
    return combine_member_breakdowns(breakdowns, alpha, lam, abs_dev=abs_dev,
                                     reduction='sum')

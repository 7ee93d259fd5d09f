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
Joint training of an ensemble of Koopman autoencoders.

One Adam state covers the concatenated member parameters ('m<j>.<name>').
Each step runs every member on its own tape, evaluates the ensemble-coupled
term on a separate tape over the member predictions, then pushes the
coupled cotangents back into the member tapes before the Adam update. The
independent regime is the variance regime at lambda = 0 on the same path.
"""
import collections
import csv
import logging
import os

import numpy as np

from koopman_uq import consts
from koopman_uq.dataio.checkpoint import Checkpoint, member_prefix
from koopman_uq.dataio.checkpoint import save_checkpoint
from koopman_uq.dataio.normalize import fit_normalizer
from koopman_uq.diffcore import functional as F
from koopman_uq.diffcore.adam import AdamState, adam_step
from koopman_uq.diffcore.tape import Tape
from koopman_uq.exceptions import ConfigError, NumericError, ShapeError
from koopman_uq.koopman.ensemble import Ensemble
from koopman_uq.koopman.model import KoopmanArchitecture, KoopmanAutoencoder
from koopman_uq.losses.objectives import (LossBreakdown, TrainingBatch,
                                          abs_deviation_loss,
                                          check_variance_lambda,
                                          combine_member_breakdowns,
                                          single_model_loss, variance_loss)
from koopman_uq.utils.workers import WorkerPool, ordered_map

logger = logging.getLogger('trainer')

LOG_COLUMNS = ('step', 'pred', 'ae', 'lin', 'orth', 'var', 'abs_dev',
               'total', 'ensemble_variance')

TrainingResult = collections.namedtuple('TrainingResult',
                                        ['checkpoint', 'history'])

RegimePlan = collections.namedtuple('RegimePlan',
                                    ['norm', 'reduction', 'coupled'])

PLANS = {
    consts.REGIME_INDEPENDENT: RegimePlan(consts.NORM_SQ_L2, 'mean', 'var'),
    consts.REGIME_VARIANCE: RegimePlan(consts.NORM_SQ_L2, 'mean', 'var'),
    consts.REGIME_CRPS_PROXY: RegimePlan(consts.NORM_L1, 'sum', 'abs_dev'),
}


def batch_indices(seed, step, count, batch_size):
    """
    Series drawn without replacement per epoch; a pure function of
    (seed, step) so that resumed runs see the same batches
    :param step: 0-based optimizer step
    :param count: number of series N
    """
    per_epoch = -(-count // batch_size)
    epoch, position = divmod(step, per_epoch)
    order = np.random.default_rng([seed, epoch]).permutation(count)
    return order[position * batch_size:(position + 1) * batch_size]


def window_batch(series, seed, step):
    """
    Random-anchor windows of ceil(T / 2) transitions from each series
    """
    steps = series.shape[1] - 1
    length = max(1, -(-steps // 2))
    rng = np.random.default_rng([seed, step, 1])
    anchors = rng.integers(0, steps - length + 1, size=series.shape[0])
    return np.stack([s[a:a + length + 1] for s, a in zip(series, anchors)])


def flatten_params(ensemble):
    flat = collections.OrderedDict()
    for j, member in enumerate(ensemble.members):
        for name, value in member.numpy_params().items():
            flat[member_prefix(j) + name] = value
    return flat


def unflatten_params(flat, arch, size):
    return [KoopmanAutoencoder(arch, collections.OrderedDict(
        (name, flat[member_prefix(j) + name]) for name in arch.param_shapes()))
        for j in range(size)]


def _float_breakdown(bd):
    return LossBreakdown(
        pred=F.as_float(bd.pred), ae=F.as_float(bd.ae),
        lin=F.as_float(bd.lin), orth=F.as_float(bd.orth), alpha=bd.alpha,
        total=F.as_float(bd.total))


class EnsembleTrainer(object):
    """
    Trains an Ensemble under one of the independent, variance or crps_proxy
    regimes
    """
    def __init__(self, config, dataset, checkpoint=None):
        """
        Constructor
        :param config: the RunConfig
        :param dataset: the training TimeSeriesDataset (physical units)
        :param checkpoint: a Checkpoint to resume from, or None
        """
        if config.regime not in PLANS:
            raise ConfigError('regime', '%r not one of %s' % (
                config.regime, consts.REGIMES))
        if config.regime == consts.REGIME_CRPS_PROXY:
            if config.lam < 0:
                raise ConfigError('lambda', 'must be >= 0, got %s' % (
                    config.lam,))
        else:
            check_variance_lambda(config.lam, config.allow_divergent)
        self.config = config
        self.dataset = dataset
        self.plan = PLANS[config.regime]

        if checkpoint is None:
            arch = KoopmanArchitecture(dataset.state_dim, config.latent_dim,
                                       config.hidden, config.activation)
            self.ensemble = Ensemble.create(
                arch, config.ensemble_size, config.seed,
                fit_normalizer(dataset), config.regime, config.lam)
            self.optimizer = AdamState.create(
                flatten_params(self.ensemble), **config.adam_hyperparameters())
            self.step = 0
        else:
            self._check_resume(checkpoint)
            self.ensemble = checkpoint.ensemble
            self.optimizer = checkpoint.optimizer
            self.step = checkpoint.step
        self.series = self.ensemble.normalizer.apply(dataset.data)
        self.pool = None

    def _check_resume(self, checkpoint):
        ens = checkpoint.ensemble
        if ens.arch.state_dim != self.dataset.state_dim:
            raise ShapeError('architecture.state_dim', '%d, dataset has %d' % (
                ens.arch.state_dim, self.dataset.state_dim))
        if (ens.regime, ens.lam, len(ens)) != (
                self.config.regime, self.config.lam,
                self.config.ensemble_size):
            raise ConfigError('resume', 'checkpoint (%s, lambda %s, M %d) '
                                        'differs from the run config' % (
                                            ens.regime, ens.lam, len(ens)))
        if checkpoint.optimizer is None:
            raise ConfigError('resume', 'checkpoint carries no optimizer '
                                        'state')

    @property
    def lam(self):
        return self.config.lam

    @property
    def scale(self):
        return 1.0 / len(self.ensemble) if self.plan.reduction == 'mean' \
            else 1.0

    def batch(self, step):
        idx = batch_indices(self.config.seed, step, self.series.shape[0],
                            self.config.batch_size)
        series = self.series[idx]
        if self.config.random_windows:
            series = window_batch(series, self.config.seed, step)
        return TrainingBatch(series)

    def _member_pass(self, member, batch):
        tape = Tape()
        bd = single_model_loss(member.bind(tape), batch, self.config.alpha,
                               self.plan.norm)
        tape.set_output(bd.total)
        return tape, bd

    def _coupled_pass(self, predictions):
        tape = Tape()
        nodes = [tape.param('m%d' % j, p) for j, p in enumerate(predictions)]
        loss = variance_loss(nodes) if self.plan.coupled == 'var' \
            else abs_deviation_loss(nodes)
        tape.set_output(loss)
        return F.as_float(loss), list(tape.backward().values())

    def compute(self, ensemble, batch):
        """
        Loss and gradients of the ensemble objective on one batch
        :return: tuple (LossBreakdown of floats, flat gradient dict,
                 ensemble_variance)
        """
        workers = self.config.workers
        passes = ordered_map(lambda m: self._member_pass(m, batch),
                             ensemble.members, workers, self.pool)
        predictions = [bd.predictions.value for _, bd in passes]
        coupled, coupled_grads = self._coupled_pass(predictions)

        def member_backward(item):
            (tape, bd), grad = item
            return tape.backward(seed=self.scale,
                                 cotangents={bd.predictions: self.lam * grad})

        member_grads = ordered_map(member_backward,
                                   list(zip(passes, coupled_grads)), workers,
                                   self.pool)
        grads = collections.OrderedDict()
        for j, member in enumerate(member_grads):
            for name, value in member.items():
                grads[member_prefix(j) + name] = value

        terms = dict(var=coupled) if self.plan.coupled == 'var' \
            else dict(abs_dev=coupled)
        breakdown = combine_member_breakdowns(
            [_float_breakdown(bd) for _, bd in passes], self.config.alpha,
            self.lam, reduction=self.plan.reduction, **terms)
        spread = float(np.mean(np.var(np.stack(predictions), axis=0)))
        return breakdown, grads, spread

    def checkpoint(self):
        return Checkpoint(self.ensemble, self.config.alpha, self.config.seed,
                          self.step, self.config.as_dict(), self.optimizer,
                          self.dataset.channels)

    def train(self, log_path=None, checkpoint_path=None):
        """
        Runs optimizer steps until config.steps have been applied
        :param log_path: CSV training log, appended to when resuming
        :param checkpoint_path: where periodic, last-good and final
                                checkpoints are written
        :return: a TrainingResult
        :raises NumericError: on a non-finite loss or gradient, after the
                              last good checkpoint was written
        """
        logger.info('Training [%d] members, regime [%s], lambda [%s], '
                    'from step [%d] to [%d]', len(self.ensemble),
                    self.config.regime, self.lam, self.step,
                    self.config.steps)
        history = list()
        log_file, writer = self._open_log(log_path)
        try:
            with WorkerPool(self.config.workers) as pool:
                self.pool = pool
                while self.step < self.config.steps:
                    row = self._advance(checkpoint_path)
                    history.append(row)
                    if writer is not None and (
                            self.step % self.config.log_every == 0 or
                            self.step == self.config.steps):
                        writer.writerow(row)
                        log_file.flush()
                    every = self.config.checkpoint_every
                    if checkpoint_path and every and self.step % every == 0:
                        save_checkpoint(self.checkpoint(), checkpoint_path)
        finally:
            self.pool = None
            if log_file is not None:
                log_file.close()
        checkpoint = self.checkpoint()
        if checkpoint_path:
            save_checkpoint(checkpoint, checkpoint_path)
        return TrainingResult(checkpoint, history)

    def _advance(self, checkpoint_path):
        params = flatten_params(self.ensemble)
        try:
            breakdown, grads, spread = self.compute(self.ensemble,
                                                    self.batch(self.step))
            if not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericError('gradient', 'non-finite gradient at step '
                                               '%d' % (self.step + 1))
            new_params, optimizer = adam_step(self.optimizer, params, grads)
        except NumericError as e:
            logger.error('Training diverged at step [%d] - [%s]',
                         self.step + 1, e)
            if checkpoint_path:
                save_checkpoint(self.checkpoint(), checkpoint_path)
                logger.info('Last good checkpoint (step [%d]) kept at [%s]',
                            self.step, checkpoint_path)
            raise
        self.ensemble = Ensemble(
            unflatten_params(new_params, self.ensemble.arch,
                             len(self.ensemble)),
            self.ensemble.normalizer, self.ensemble.regime, self.ensemble.lam)
        self.optimizer = optimizer
        self.step += 1
        row = collections.OrderedDict(step=self.step)
        losses = breakdown.as_dict()
        for column in LOG_COLUMNS[1:-1]:
            row[column] = losses[column]
        row['ensemble_variance'] = spread
        logger.debug('Step [%d] total [%s] ensemble variance [%s]',
                     self.step, row['total'], spread)
        return row

    def _open_log(self, log_path):
        if not log_path:
            return None, None
        resume = self.step > 0 and os.path.exists(log_path)
        log_file = open(log_path, 'a' if resume else 'w', newline='')
        writer = csv.DictWriter(log_file, fieldnames=LOG_COLUMNS)
        if not resume:
            writer.writeheader()
        return log_file, writer

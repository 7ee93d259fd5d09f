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
Implementations of the gen-data, train, evaluate, forecast and sweep
sub-commands. Each takes the parsed argparse namespace.
"""
import csv
import json
import logging
import os

import numpy as np
import yaml

from koopman_uq import consts
from koopman_uq.cli.config import build_config, config_fields
from koopman_uq.cli.svg import write_band_plot
from koopman_uq.dataio.checkpoint import load_checkpoint
from koopman_uq.dataio.dataset import split_dataset, truncate
from koopman_uq.dataio.kts import load_dataset, save_dataset
from koopman_uq.dataio.systems import InitDistribution, SystemSpec, generate
from koopman_uq.exceptions import ConfigError, ContractError, KoopmanUQError
from koopman_uq.training.evaluation import (evaluate_ensemble,
                                            physical_forecast)
from koopman_uq.training.trainer import EnsembleTrainer

logger = logging.getLogger('commands')

CHECKPOINT_FILE = 'checkpoint.json'
TRAIN_LOG_FILE = 'train_log.csv'
SWEEP_FILE = 'sweep.csv'
SPLITS = ('train', 'test')
SWEEP_COLUMNS = ('label', 'regime', 'lambda', 'crps_extrap', 'crps_transfer',
                 'ssrel_extrap', 'ssrat_extrap', 'ssrel_transfer',
                 'ssrat_transfer', 'status')


def _flag(key):
    return '--' + str(key).replace('_', '-')


def parse_params(pairs):
    """
    Parses repeated key=value flags; values are read as YAML scalars/lists
    """
    params = dict()
    for pair in pairs or list():
        key, sep, value = pair.partition('=')
        if not sep or not key:
            raise ConfigError('--param', 'expected key=value, got %r' % pair)
        try:
            params[key] = yaml.safe_load(value)
        except yaml.YAMLError as e:
            raise ConfigError('--param', 'bad value for %s - %s' % (key, e))
    return params


def cmd_gen_data(args):
    """
    Generates a synthetic dataset and writes it as a KTS1 file
    """
    try:
        spec = SystemSpec(args.system, parse_params(args.param),
                          args.noise_std, args.seed, args.noise_seed)
        init = InitDistribution(args.init, args.init_scale)
        dataset = generate(spec, args.n_series, args.steps, args.dt, init)
    except ConfigError as e:
        if str(e.expression).startswith('--'):
            raise
        raise ConfigError(_flag(e.expression), e.message)
    save_dataset(dataset, args.output)
    summary = dataset.summary()
    print('N=%(N)d T=%(T)d n=%(n)d dt=%(dt)s' % summary)
    return summary


def config_from_args(args):
    overrides = dict((key, getattr(args, key, None))
                     for key in config_fields())
    return build_config(getattr(args, 'config', None), overrides)


def prepare_splits(config, dataset=None):
    """
    :return: tuple (train, test) where train keeps every step and test is
             None when test_fraction is 0
    """
    if dataset is None:
        if not config.dataset:
            raise ConfigError('--dataset', 'no dataset given')
        dataset = load_dataset(config.dataset)
    return split_dataset(dataset, config.test_fraction)


def run_training(config, dataset=None, resume=None):
    """
    Trains one ensemble into config.output_dir
    :param resume: a checkpoint path to resume from, or None
    :return: the TrainingResult
    """
    train, _ = prepare_splits(config, dataset)
    checkpoint = load_checkpoint(resume) if resume else None
    if not os.path.isdir(config.output_dir):
        os.makedirs(config.output_dir)
    trainer = EnsembleTrainer(config, truncate(train, config.train_horizon),
                              checkpoint)
    return trainer.train(
        log_path=os.path.join(config.output_dir, TRAIN_LOG_FILE),
        checkpoint_path=os.path.join(config.output_dir, CHECKPOINT_FILE))


def cmd_train(args):
    """
    Trains an ensemble and writes checkpoint.json and train_log.csv
    """
    config = config_from_args(args)
    result = run_training(config, resume=getattr(args, 'resume', None))
    final = result.history[-1] if result.history else dict()
    print('step=%s total=%s ensemble_variance=%s' % (
        result.checkpoint.step, final.get('total'),
        final.get('ensemble_variance')))
    return result


def evaluate_splits(ensemble, train, test, horizon=None, splits=SPLITS,
                    bin_count=None, workers=None):
    """
    :return: dict of split name to EvaluationReport
    """
    datasets = dict(train=train, test=test)
    reports = dict()
    for split in splits:
        if datasets[split] is None:
            raise ConfigError('--split', 'no held-out series, test_fraction '
                                         'is 0')
        reports[split] = evaluate_ensemble(ensemble, datasets[split],
                                           horizon, split, bin_count, workers)
    return reports


def write_report(report, output_dir):
    """
    Writes report_<split>.json and report_<split>_bins.csv
    """
    base = os.path.join(output_dir, 'report_%s' % report.split)
    with open(base + '.json', 'w') as f:
        json.dump(report.as_dict(), f, indent=2, sort_keys=True)
    with open(base + '_bins.csv', 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(('spread', 'skill', 'count'))
        for b in report.spread_skill.bins:
            writer.writerow((repr(b.spread), repr(b.skill), b.count))
    logger.info('Wrote report [%s]', base + '.json')


def cmd_evaluate(args):
    """
    Forecasts the train (extrapolation) and/or test (transfer) series from
    t = 0 and writes the JSON reports and bin tables
    """
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    fraction = args.test_fraction
    if fraction is None:
        fraction = checkpoint.config.get('test_fraction',
                                         consts.TEST_FRACTION)
    train, test = split_dataset(dataset, fraction)
    splits = SPLITS if args.split == 'all' else (args.split,)
    reports = evaluate_splits(checkpoint.ensemble, train, test, args.horizon,
                              splits, args.bins, args.workers)
    output_dir = args.output_dir or os.path.dirname(
        os.path.abspath(args.checkpoint))
    if not os.path.isdir(output_dir):
        os.makedirs(output_dir)
    for split in splits:
        report = reports[split]
        write_report(report, output_dir)
        print('%s: CRPS=%.6g SSREL=%.6g SSRAT=%.6g (%s)' % (
            split, report.crps, report.spread_skill.ssrel,
            report.spread_skill.ssrat, report.spread_skill.confidence))
    return reports


def forecast_table(dist, truth, times, channels):
    """
    :return: tuple (header, rows) with columns t, then per channel c
             truth_c, mean_c, member_<j>_c, spread_c
    """
    size = dist.size
    header = ['t']
    for name in channels:
        header += ['truth_%s' % name, 'mean_%s' % name]
        header += ['member_%d_%s' % (j, name) for j in range(size)]
        header.append('spread_%s' % name)
    rows = list()
    for k, t in enumerate(times):
        row = [t]
        for c in range(len(channels)):
            row += [truth[k, c], dist.mean[k, c]]
            row += [dist.members[j, k, c] for j in range(size)]
            row.append(dist.spread[k, c])
        rows.append(row)
    return header, rows


def cmd_forecast(args):
    """
    Forecasts one series from t = 0 and writes the trajectory CSV (and
    optionally an SVG band plot)
    """
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    if not 0 <= args.index < dataset.n_series:
        raise ContractError('--index', '%d outside [0, %d)' % (
            args.index, dataset.n_series))
    horizon = dataset.steps if args.horizon is None else args.horizon
    if not 1 <= horizon <= dataset.steps:
        raise ConfigError('--horizon', 'must lie in [1, %d], got %s' % (
            dataset.steps, horizon))
    series = dataset.data[args.index]
    dist = physical_forecast(checkpoint.ensemble, series[0], horizon,
                             args.workers)
    truth = series[1:horizon + 1]
    times = dataset.dt * np.arange(1, horizon + 1)
    header, rows = forecast_table(dist, truth, times, dataset.channels)
    with open(args.output, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    logger.info('Wrote [%d] forecast rows to [%s]', len(rows), args.output)
    if args.svg:
        write_band_plot(args.svg, times, truth, dist.mean, dist.spread,
                        dist.members, dataset.channels)
    return header, rows


def _label(regime, lam):
    return '%s(lambda=%s)' % (regime, lam)


def sweep_runs(lambdas, include_crps_proxy):
    runs = [(consts.REGIME_VARIANCE, float(lam)) for lam in lambdas]
    if include_crps_proxy:
        runs.append((consts.REGIME_CRPS_PROXY, consts.CRPS_PROXY_LAMBDA))
    return runs


def sweep_row(config, dataset, regime, lam):
    """
    Trains and evaluates one sweep entry
    """
    run_config = config.replace(
        regime=regime, lam=lam,
        output_dir=os.path.join(config.output_dir, '%s_%s' % (regime, lam)))
    result = run_training(run_config, dataset)
    train, test = prepare_splits(run_config, dataset)
    splits = ('train', 'test') if test is not None else ('train',)
    reports = evaluate_splits(result.checkpoint.ensemble, train, test,
                              run_config.horizon, splits,
                              workers=run_config.workers)
    row = dict(label=_label(regime, lam), regime=regime, **{'lambda': lam})
    for split, task in (('train', 'extrap'), ('test', 'transfer')):
        report = reports.get(split)
        if report is None:
            continue
        write_report(report, run_config.output_dir)
        row['crps_%s' % task] = report.crps
        row['ssrel_%s' % task] = report.spread_skill.ssrel
        row['ssrat_%s' % task] = report.spread_skill.ssrat
    row['status'] = 'ok'
    return row


def cmd_sweep(args):
    """
    Trains one ensemble per lambda with the shared base seed and tabulates
    the CRPS and spread-skill scores of both tasks. A failed run is marked
    in the table and the sweep goes on; the first failure is re-raised once
    the table is written
    """
    config = config_from_args(args)
    dataset = load_dataset(config.dataset) if config.dataset else None
    if dataset is None:
        raise ConfigError('--dataset', 'no dataset given')
    lambdas = args.lambdas if args.lambdas else consts.LAMBDA_SWEEP
    for lam in lambdas:
        if lam < 0 or (lam > 1 and not config.allow_divergent):
            raise ConfigError('--lambdas', '%s rejected: %s' % (
                lam, consts.DIVERGENCE_MSG))
    if not os.path.isdir(config.output_dir):
        os.makedirs(config.output_dir)

    rows, failures = list(), list()
    for regime, lam in sweep_runs(lambdas, args.include_crps_proxy):
        try:
            row = sweep_row(config, dataset, regime, lam)
        except KoopmanUQError as e:
            logger.error('Sweep run [%s] failed - [%s]', _label(regime, lam),
                         e)
            failures.append(e)
            row = dict(label=_label(regime, lam), regime=regime,
                       status='failed: %s' % e, **{'lambda': lam})
        rows.append(row)

    path = os.path.join(config.output_dir, SWEEP_FILE)
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS, restval='')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    logger.info('Wrote sweep table of [%d] rows to [%s]', len(rows), path)
    for row in rows:
        print(','.join(str(row.get(column, '')) for column in SWEEP_COLUMNS))
    if failures:
        raise failures[0]
    return rows

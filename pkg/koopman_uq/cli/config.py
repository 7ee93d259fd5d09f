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
import dataclasses
import json
import logging
from typing import Optional, Tuple

import yaml

from koopman_uq import consts
from koopman_uq.exceptions import ConfigError
from koopman_uq.losses.objectives import check_variance_lambda

logger = logging.getLogger('config')

# Config file spellings that differ from the field names
ALIASES = {'lambda': 'lam', 'M': 'ensemble_size', 'd': 'latent_dim'}


@dataclasses.dataclass
class RunConfig(object):
    """
    Everything a training or evaluation run depends on. lam defaults to 1
    for crps_proxy and 0 otherwise
    """
    dataset: Optional[str] = None
    output_dir: str = '.'
    latent_dim: int = consts.LATENT_DIM
    hidden: Tuple[int, ...] = consts.HIDDEN_WIDTHS
    activation: str = consts.ACTIVATION
    ensemble_size: int = consts.ENSEMBLE_SIZE
    regime: str = consts.REGIME_INDEPENDENT
    lam: Optional[float] = None
    alpha: float = consts.ALPHA
    lr: float = consts.ADAM_LR
    beta1: float = consts.ADAM_BETA1
    beta2: float = consts.ADAM_BETA2
    eps: float = consts.ADAM_EPS
    steps: int = consts.TRAIN_STEPS
    batch_size: int = consts.BATCH_SIZE
    seed: int = consts.SEED
    horizon: Optional[int] = None
    test_fraction: float = consts.TEST_FRACTION
    train_horizon: Optional[int] = None
    random_windows: bool = False
    allow_divergent: bool = False
    workers: Optional[int] = None
    log_every: int = consts.LOG_EVERY
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.lam is None:
            self.lam = consts.CRPS_PROXY_LAMBDA \
                if self.regime == consts.REGIME_CRPS_PROXY else 0.0
        self.hidden = tuple(int(w) for w in self.hidden)
        self.lam = float(self.lam)
        self.validate()

    def validate(self):
        if self.regime not in consts.REGIMES:
            raise ConfigError('regime', '%r not one of %s' % (
                self.regime, consts.REGIMES))
        if self.regime == consts.REGIME_INDEPENDENT and self.lam != 0:
            raise ConfigError('lambda', 'the independent regime has no '
                                        'diversity term, got %s' % self.lam)
        if self.regime == consts.REGIME_CRPS_PROXY:
            if self.lam < 0:
                raise ConfigError('lambda', 'must be >= 0, got %s' % (
                    self.lam,))
        else:
            check_variance_lambda(self.lam, self.allow_divergent)
        for key in ('ensemble_size', 'steps', 'batch_size', 'latent_dim',
                    'log_every'):
            if getattr(self, key) < 1:
                raise ConfigError(key, 'must be >= 1, got %s' % (
                    getattr(self, key),))
        if self.alpha < 0:
            raise ConfigError('alpha', 'must be >= 0, got %s' % self.alpha)
        if self.seed < 0:
            raise ConfigError('seed', 'must be unsigned, got %s' % self.seed)
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError('test_fraction', 'must lie in [0, 1), got %s'
                              % self.test_fraction)
        for key in ('horizon', 'train_horizon', 'workers'):
            value = getattr(self, key)
            if value is not None and value < 1:
                raise ConfigError(key, 'must be >= 1, got %s' % value)
        if self.checkpoint_every < 0:
            raise ConfigError('checkpoint_every', 'must be >= 0')

    def adam_hyperparameters(self):
        return dict(lr=self.lr, beta1=self.beta1, beta2=self.beta2,
                    eps=self.eps)

    def as_dict(self):
        out = dataclasses.asdict(self)
        out['hidden'] = list(self.hidden)
        return out

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def config_fields():
    return set(f.name for f in dataclasses.fields(RunConfig))


def read_config_file(path):
    """
    Reads a JSON or YAML (by file extension) config file
    :return: a dict of RunConfig field values
    """
    with open(path, 'r') as f:
        if path.endswith('json'):
            values = json.load(f)
        else:
            values = yaml.safe_load(f)
    if values is None:
        values = dict()
    if not isinstance(values, dict):
        raise ConfigError(path, 'config file must hold a mapping')
    logger.info('Read config file [%s] - [%s]', path, values)
    return values


def build_config(path=None, overrides=None):
    """
    Merges config file values with flag overrides (None values ignored)
    :param path: a JSON/YAML config file, or None
    :param overrides: dict of field name to value from the command line
    :return: the validated RunConfig
    """
    values = read_config_file(path) if path else dict()
    values = dict((ALIASES.get(key, key), value)
                  for key, value in values.items())
    values.update((key, value) for key, value in (overrides or dict()).items()
                  if value is not None)
    unknown = set(values) - config_fields()
    if unknown:
        raise ConfigError(sorted(unknown)[0], 'unknown config field')
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(path or 'flags', str(e))

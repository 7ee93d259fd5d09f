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
Checkpoints are a UTF-8 JSON manifest. Every array is stored as base64 of
its little-endian float64 bytes, its shape derived from the architecture.
"""
import collections
import json
import logging

from koopman_uq import consts
from koopman_uq.dataio.normalize import Normalizer
from koopman_uq.diffcore.adam import AdamState
from koopman_uq.exceptions import (DataFormatError, KoopmanUQError)
from koopman_uq.koopman.ensemble import Ensemble
from koopman_uq.koopman.model import KoopmanArchitecture, KoopmanAutoencoder
from koopman_uq.utils import convert

logger = logging.getLogger('checkpoint')


def member_prefix(index):
    return 'm%d.' % index


class Checkpoint(object):
    """
    An ensemble plus the training state needed to evaluate or resume it
    """
    def __init__(self, ensemble, alpha, seed, step, config=None,
                 optimizer=None, channels=None):
        """
        Constructor
        :param ensemble: the Ensemble (carries regime, lambda, normalizer)
        :param alpha: orthogonality weight used in training
        :param seed: base seed of the run
        :param step: optimizer steps applied
        :param config: echo of the run configuration (JSON-safe dict)
        :param optimizer: AdamState over 'm<j>.<name>' arrays, or None
        :param channels: the dataset channel names
        """
        self.ensemble = ensemble
        self.alpha = float(alpha)
        self.seed = int(seed)
        self.step = int(step)
        self.config = dict(config or dict())
        self.optimizer = optimizer
        self.channels = list(channels) if channels else None

    @property
    def regime(self):
        return self.ensemble.regime

    @property
    def lam(self):
        return self.ensemble.lam


def _encode_params(params):
    return collections.OrderedDict(
        (name, convert.encode_b64(value)) for name, value in params.items())


def checkpoint_manifest(checkpoint):
    ensemble = checkpoint.ensemble
    norm = ensemble.normalizer
    manifest = collections.OrderedDict([
        ('version', consts.CHECKPOINT_VERSION),
        ('architecture', ensemble.arch.as_dict()),
        ('ensemble_size', len(ensemble)),
        ('regime', ensemble.regime),
        ('alpha', checkpoint.alpha),
        ('lambda', ensemble.lam),
        ('seed', checkpoint.seed),
        ('step', checkpoint.step),
        ('channels', checkpoint.channels),
        ('normalization', dict(mean=convert.encode_b64(norm.mean),
                               std=convert.encode_b64(norm.std))),
        ('config', checkpoint.config),
        ('members', [_encode_params(m.numpy_params())
                     for m in ensemble.members]),
        ('optimizer', None),
    ])
    opt = checkpoint.optimizer
    if opt is not None:
        manifest['optimizer'] = dict(step=opt.step, m=_encode_params(opt.m),
                                     v=_encode_params(opt.v),
                                     **opt.hyperparameters())
    return manifest


def save_checkpoint(checkpoint, path):
    with open(path, 'w') as f:
        json.dump(checkpoint_manifest(checkpoint), f, indent=2)
    logger.info('Wrote checkpoint at step [%d] to [%s]', checkpoint.step,
                path)


def _field(manifest, key, path):
    if key not in manifest:
        raise DataFormatError(path, 'missing field "%s"' % key)
    return manifest[key]


def _decode(text, shape, field, arch, path):
    try:
        return convert.decode_b64(text, shape)
    except (ValueError, AttributeError) as e:
        raise DataFormatError(path, '%s does not match the declared '
                                    'architecture (%s) - %s' % (
                                        field, _describe(arch), e))


def _describe(arch):
    return ', '.join('architecture.%s = %s' % (key, value)
                     for key, value in sorted(arch.as_dict().items()))


def _decode_params(blobs, arch, prefix, field, path):
    shapes = arch.param_shapes()
    names = set(prefix + name for name in shapes)
    if not isinstance(blobs, dict) or set(blobs) != names:
        raise DataFormatError(path, '%s names %s, architecture expects %s' % (
            field, sorted(blobs) if isinstance(blobs, dict) else blobs,
            sorted(names)))
    return collections.OrderedDict(
        (prefix + name, _decode(blobs[prefix + name], shape,
                                '%s.%s' % (field, prefix + name), arch, path))
        for name, shape in shapes.items())


def parse_manifest(manifest, path='<manifest>'):
    """
    Rebuilds a Checkpoint from a manifest dict
    :raises DataFormatError: on a version mismatch or a field that does not
                             match the declared architecture
    """
    version = _field(manifest, 'version', path)
    if version != consts.CHECKPOINT_VERSION:
        raise DataFormatError(path, 'version %s, expected %s' % (
            version, consts.CHECKPOINT_VERSION))
    try:
        arch = KoopmanArchitecture(**_field(manifest, 'architecture', path))
    except (TypeError, KoopmanUQError) as e:
        raise DataFormatError(path, 'bad architecture - %s' % e)
    members = _field(manifest, 'members', path)
    if len(members) != _field(manifest, 'ensemble_size', path):
        raise DataFormatError(path, 'ensemble_size %s, %d member blobs' % (
            manifest['ensemble_size'], len(members)))

    models = [KoopmanAutoencoder(arch, _decode_params(
        blobs, arch, '', 'members[%d]' % j, path))
        for j, blobs in enumerate(members)]
    norm = _field(manifest, 'normalization', path)
    normalizer = Normalizer(
        _decode(norm.get('mean'), (arch.state_dim,), 'normalization.mean',
                arch, path),
        _decode(norm.get('std'), (arch.state_dim,), 'normalization.std',
                arch, path))
    try:
        ensemble = Ensemble(models, normalizer,
                            _field(manifest, 'regime', path),
                            _field(manifest, 'lambda', path))
    except KoopmanUQError as e:
        raise DataFormatError(path, e.message)

    optimizer = None
    opt = manifest.get('optimizer')
    if opt is not None:
        moments = list()
        for key in ('m', 'v'):
            arrays = collections.OrderedDict()
            for j in range(len(models)):
                arrays.update(_decode_params(
                    dict((k, b) for k, b in _field(opt, key, path).items()
                         if k.startswith(member_prefix(j))),
                    arch, member_prefix(j), 'optimizer.%s' % key, path))
            moments.append(arrays)
        optimizer = AdamState(
            moments[0], moments[1], step=_field(opt, 'step', path),
            lr=_field(opt, 'lr', path), beta1=_field(opt, 'beta1', path),
            beta2=_field(opt, 'beta2', path), eps=_field(opt, 'eps', path))

    return Checkpoint(ensemble, _field(manifest, 'alpha', path),
                      _field(manifest, 'seed', path),
                      _field(manifest, 'step', path),
                      manifest.get('config'), optimizer,
                      manifest.get('channels'))


def load_checkpoint(path):
    try:
        with open(path, 'r') as f:
            manifest = json.load(f)
    except ValueError as e:
        raise DataFormatError(path, 'not a JSON manifest - %s' % e)
    if not isinstance(manifest, dict):
        raise DataFormatError(path, 'manifest must be a JSON object')
    checkpoint = parse_manifest(manifest, path)
    logger.info('Loaded checkpoint of [%d] members at step [%d] from [%s]',
                len(checkpoint.ensemble), checkpoint.step, path)
    return checkpoint

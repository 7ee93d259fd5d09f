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
Koopman autoencoder: an MLP encoder phi: R^n -> R^d, an MLP decoder
psi: R^d -> R^n and a latent transition matrix K, forecasting
x_tau = psi(K^tau phi(x_0)).

The functions here accept either plain float64 arrays or a model bound to a
Tape (see KoopmanAutoencoder.bind), in which case every operation is recorded
for reverse-mode differentiation.
"""
import collections
import logging

import numpy as np

from koopman_uq import consts
from koopman_uq.diffcore import functional as F
from koopman_uq.diffcore.tape import real_array
from koopman_uq.exceptions import ConfigError, ContractError, ShapeError

logger = logging.getLogger('koopman_model')

K_NAME = 'K'


class KoopmanArchitecture(collections.namedtuple(
        'KoopmanArchitecture', ['state_dim', 'latent_dim', 'hidden',
                                'activation'])):
    """
    Dimensions of a Koopman autoencoder: n state channels, d latent
    dimensions, the hidden layer widths shared (mirrored) by encoder and
    decoder and the hidden activation tag
    """
    __slots__ = ()

    def __new__(cls, state_dim, latent_dim=consts.LATENT_DIM,
                hidden=consts.HIDDEN_WIDTHS, activation=consts.ACTIVATION):
        hidden = tuple(int(w) for w in hidden)
        if state_dim < 1:
            raise ConfigError('state_dim', 'must be >= 1, got %s' % state_dim)
        if latent_dim < 1:
            raise ConfigError('latent_dim',
                              'must be >= 1, got %s' % latent_dim)
        if any(w < 1 for w in hidden):
            raise ConfigError('hidden', 'widths must be >= 1, got %s' % (
                hidden,))
        if activation not in consts.ACTIVATIONS:
            raise ConfigError('activation', '%r not one of %s' % (
                activation, consts.ACTIVATIONS))
        return super(KoopmanArchitecture, cls).__new__(
            cls, int(state_dim), int(latent_dim), hidden, activation)

    @property
    def encoder_widths(self):
        return (self.state_dim,) + self.hidden + (self.latent_dim,)

    @property
    def decoder_widths(self):
        return (self.latent_dim,) + tuple(reversed(self.hidden)) + (
            self.state_dim,)

    def param_shapes(self):
        """
        :return: ordered dict of parameter name to shape
        """
        shapes = collections.OrderedDict()
        for prefix, widths in (('encoder', self.encoder_widths),
                               ('decoder', self.decoder_widths)):
            for layer in range(len(widths) - 1):
                shapes['%s.%d.weight' % (prefix, layer)] = (
                    widths[layer + 1], widths[layer])
                shapes['%s.%d.bias' % (prefix, layer)] = (widths[layer + 1],)
        shapes[K_NAME] = (self.latent_dim, self.latent_dim)
        return shapes

    def as_dict(self):
        return dict(state_dim=self.state_dim, latent_dim=self.latent_dim,
                    hidden=list(self.hidden), activation=self.activation)


class KoopmanAutoencoder(object):
    """
    Parameters theta = (phi, psi, K) of one Koopman autoencoder
    """
    def __init__(self, arch, params):
        """
        Constructor
        :param arch: the KoopmanArchitecture
        :param params: dict of parameter name to float64 array (or Node when
                       bound to a tape)
        :raises ShapeError: when a parameter is missing or mis-shaped
        """
        self.arch = arch
        self.params = collections.OrderedDict()
        for name, shape in arch.param_shapes().items():
            if name not in params:
                raise ShapeError(name, 'missing parameter')
            value = params[name]
            if not F.is_node(value):
                value = real_array(value, name=name)
            if tuple(F.shape_of(value)) != shape:
                raise ShapeError(name, 'shape %s, architecture expects %s' % (
                    tuple(F.shape_of(value)), shape))
            self.params[name] = value
        extra = set(params) - set(self.params)
        if extra:
            raise ShapeError(sorted(extra)[0], 'unknown parameter')

    @property
    def K(self):
        return self.params[K_NAME]

    @property
    def is_bound(self):
        return F.is_node(self.K)

    def bind(self, tape, prefix=''):
        """
        Registers every parameter on `tape` as a differentiable input
        :param tape: the Tape
        :param prefix: prepended to parameter names (e.g. 'm3.')
        :return: a KoopmanAutoencoder whose params are tape Nodes
        """
        return KoopmanAutoencoder(self.arch, collections.OrderedDict(
            (name, tape.param(prefix + name, value))
            for name, value in self.params.items()))

    def numpy_params(self):
        return collections.OrderedDict(
            (name, np.array(F.value_of(value)))
            for name, value in self.params.items())

    def layers(self, prefix):
        count = len(self.arch.encoder_widths if prefix == 'encoder'
                    else self.arch.decoder_widths) - 1
        return [(self.params['%s.%d.weight' % (prefix, layer)],
                 self.params['%s.%d.bias' % (prefix, layer)])
                for layer in range(count)]


def init_model(arch, seed, k_noise=consts.K_INIT_NOISE):
    """
    Glorot-uniform MLP weights, zero biases, K = I + N(0, k_noise^2)
    :param arch: the KoopmanArchitecture
    :param seed: the member seed
    :param k_noise: scale of the i.i.d. noise added to the identity K
    :return: a KoopmanAutoencoder
    """
    rng = np.random.default_rng(seed)
    params = collections.OrderedDict()
    for name, shape in arch.param_shapes().items():
        if name == K_NAME:
            params[name] = np.eye(arch.latent_dim) + k_noise * \
                rng.standard_normal(shape)
        elif name.endswith('.bias'):
            params[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
    logger.debug('Initialized model with seed - [%s]', seed)
    return KoopmanAutoencoder(arch, params)


def _mlp(layers, x, activation):
    last = len(layers) - 1
    for index, (weight, bias) in enumerate(layers):
        x = F.affine(x, weight, bias)
        if index < last and activation == 'tanh':
            x = F.tanh(x)
    return x


def _check_width(x, width, name):
    shape = F.shape_of(x)
    if len(shape) not in (1, 2) or shape[-1] != width:
        raise ShapeError(name, 'expected shape (%d,) or (B, %d), got %s' % (
            width, width, tuple(shape)))


def encode(model, x):
    """
    phi(x) for x of shape (n,) or (B, n)
    """
    _check_width(x, model.arch.state_dim, 'x')
    return _mlp(model.layers('encoder'), x, model.arch.activation)


def decode(model, z):
    """
    psi(z) for z of shape (d,) or (B, d)
    """
    _check_width(z, model.arch.latent_dim, 'z')
    return _mlp(model.layers('decoder'), z, model.arch.activation)


def rollout_latent(model, z0, horizon):
    """
    Applies z_{t+1} = K z_t `horizon` times
    :param model: the model holding K
    :param z0: latent state (d,) or batch (B, d)
    :param horizon: H >= 1
    :return: (H, d) or (B, H, d) stacked states z_1 ... z_H
    """
    if horizon < 1:
        raise ContractError('horizon', 'must be >= 1, got %s' % horizon)
    _check_width(z0, model.arch.latent_dim, 'z0')
    batched = len(F.shape_of(z0)) == 2
    k_t = F.transpose(model.K) if batched else None
    states = list()
    z = z0
    for _ in range(horizon):
        z = F.matmul(z, k_t) if batched else F.matmul(model.K, z)
        states.append(z)
    return F.stack(states, axis=1 if batched else 0)


def decode_trajectory(model, latents):
    """
    Decodes (H, d) or (B, H, d) latent trajectories to (H, n) / (B, H, n)
    """
    shape = F.shape_of(latents)
    if len(shape) == 2:
        return decode(model, latents)
    flat = decode(model, F.reshape(latents, (shape[0] * shape[1], shape[2])))
    return F.reshape(flat, (shape[0], shape[1], model.arch.state_dim))


def forecast(model, x0, horizon):
    """
    x_tau = psi(K^tau phi(x0)) for tau = 1 ... H in normalized space
    :param model: the KoopmanAutoencoder
    :param x0: (n,) or (B, n)
    :param horizon: H >= 1
    :return: (H, n) or (B, H, n)
    """
    if not F.is_node(x0):
        x0 = real_array(x0, name='x0')
    latents = rollout_latent(model, encode(model, x0), horizon)
    return decode_trajectory(model, latents)

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
Primitive operations recorded on a Tape.

Every primitive pairs a numpy forward kernel with its vector-Jacobian product
(vjp). A vjp receives the output cotangent ``g``, the forward output and the
parent values, and returns one cotangent per parent.
"""
import collections

import numpy as np

Primitive = collections.namedtuple('Primitive', ['name', 'forward', 'vjp'])

REGISTRY = dict()


def primitive(name, forward, vjp):
    REGISTRY[name] = Primitive(name, forward, vjp)


def unbroadcast(grad, shape):
    """
    Sums `grad` down to `shape`, undoing numpy broadcasting
    """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _matmul_vjp(g, out, a, b):
    if a.ndim == 2 and b.ndim == 2:
        return g @ b.T, a.T @ g
    if a.ndim == 2 and b.ndim == 1:
        return np.outer(g, b), a.T @ g
    if a.ndim == 1 and b.ndim == 2:
        return b @ g, np.outer(a, g)
    return g * b, g * a


def _matmul(a, b):
    if a.ndim > 2 or b.ndim > 2 or a.ndim == 0 or b.ndim == 0:
        raise ValueError('matmul supports 1-D and 2-D operands, got %s and %s'
                         % (a.shape, b.shape))
    return a @ b


def _affine(x, w, b):
    if x.ndim not in (1, 2) or w.ndim != 2 or b.shape != (w.shape[0],):
        raise ValueError('affine expects x (N, in) or (in,), W (out, in), '
                         'b (out,), got %s, %s, %s' % (x.shape, w.shape,
                                                       b.shape))
    return x @ w.T + b


def _affine_vjp(g, out, x, w, b):
    if x.ndim == 1:
        return g @ w, np.outer(g, x), g
    return g @ w, g.T @ x, g.sum(axis=0)


def _sum(a, axis=None):
    return np.asarray(np.sum(a, axis=axis))


def _expand(g, shape, axis):
    if axis is None:
        return np.broadcast_to(g, shape).copy()
    return np.broadcast_to(np.expand_dims(g, axis), shape).copy()


def _sum_vjp(g, out, a, axis=None):
    return (_expand(g, a.shape, axis),)


def _mean(a, axis=None):
    return np.asarray(np.mean(a, axis=axis))


def _mean_vjp(g, out, a, axis=None):
    count = a.size if axis is None else a.shape[axis]
    return (_expand(g, a.shape, axis) / count,)


def _stack_vjp(g, out, *parents, axis=0):
    return tuple(np.take(g, i, axis=axis) for i in range(len(parents)))


def _getitem_vjp(g, out, a, index=None):
    grad = np.zeros_like(a)
    np.add.at(grad, index, g)
    return (grad,)


primitive('add', lambda a, b: a + b,
          lambda g, out, a, b: (unbroadcast(g, a.shape),
                                unbroadcast(g, b.shape)))
primitive('sub', lambda a, b: a - b,
          lambda g, out, a, b: (unbroadcast(g, a.shape),
                                unbroadcast(-g, b.shape)))
primitive('mul', lambda a, b: a * b,
          lambda g, out, a, b: (unbroadcast(g * b, a.shape),
                                unbroadcast(g * a, b.shape)))
primitive('neg', lambda a: -a, lambda g, out, a: (-g,))
primitive('matmul', _matmul, _matmul_vjp)
primitive('affine', _affine, _affine_vjp)
primitive('transpose', lambda a: a.T, lambda g, out, a: (g.T,))
primitive('tanh', np.tanh, lambda g, out, a: (g * (1.0 - out * out),))
primitive('square', lambda a: a * a, lambda g, out, a: (2.0 * a * g,))
# np.sign(0) == 0 makes the subgradient of |x| at the kink 0
primitive('abs', np.abs, lambda g, out, a: (np.sign(a) * g,))
primitive('sum', _sum, _sum_vjp)
primitive('mean', _mean, _mean_vjp)
primitive('reshape', lambda a, shape=None: np.reshape(a, shape),
          lambda g, out, a, shape=None: (np.reshape(g, a.shape),))
primitive('stack', lambda *parents, axis=0: np.stack(parents, axis=axis),
          _stack_vjp)
primitive('getitem', lambda a, index=None: np.array(a[index]), _getitem_vjp)

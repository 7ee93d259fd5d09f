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
Array helpers that record on a Tape when any argument is a Node and fall back
to plain numpy otherwise, so model and loss code runs unchanged in both modes.
"""
import numpy as np

from koopman_uq.diffcore.tape import Node


def is_node(value):
    return isinstance(value, Node)


def _tape(*values):
    for value in values:
        if is_node(value):
            return value.tape
    return None


def value_of(value):
    """
    Returns the numpy value behind a Node, or the value itself
    """
    if is_node(value):
        return value.value
    return value


def as_float(value):
    return float(np.asarray(value_of(value)).reshape(()))


def tanh(x):
    tape = _tape(x)
    if tape is None:
        return np.tanh(x)
    return tape.apply('tanh', x)


def square(x):
    tape = _tape(x)
    if tape is None:
        return np.square(x)
    return tape.apply('square', x)


def abs_(x):
    tape = _tape(x)
    if tape is None:
        return np.abs(x)
    return tape.apply('abs', x)


def sum_(x, axis=None):
    tape = _tape(x)
    if tape is None:
        return np.sum(x, axis=axis)
    return tape.apply('sum', x, axis=axis)


def mean(x, axis=None):
    tape = _tape(x)
    if tape is None:
        return np.mean(x, axis=axis)
    return tape.apply('mean', x, axis=axis)


def reshape(x, shape):
    tape = _tape(x)
    if tape is None:
        return np.reshape(x, shape)
    return tape.apply('reshape', x, shape=tuple(shape))


def stack(values, axis=0):
    values = list(values)
    tape = _tape(*values)
    if tape is None:
        return np.stack(values, axis=axis)
    return tape.apply('stack', *values, axis=axis)


def matmul(a, b):
    tape = _tape(a, b)
    if tape is None:
        return np.matmul(a, b)
    return tape.apply('matmul', a, b)


def affine(x, w, b):
    """
    Dense layer x @ W.T + b for x of shape (in,) or (N, in)
    """
    tape = _tape(x, w, b)
    if tape is None:
        return x @ np.transpose(w) + b
    return tape.apply('affine', x, w, b)


def transpose(x):
    tape = _tape(x)
    if tape is None:
        return np.transpose(x)
    return tape.apply('transpose', x)


def shape_of(x):
    return np.shape(value_of(x))

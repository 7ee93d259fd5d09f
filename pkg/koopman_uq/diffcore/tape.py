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
Define-by-run reverse-mode differentiation over float64 numpy arrays.

A Tape is an append-only list of records. Each record names a primitive
from ``koopman_uq.diffcore.ops`` and the indices of its parents, which always
precede it, so the tape is acyclic by construction. Values are computed
eagerly as records are appended and can be recomputed with new inputs by
``forward``. A Tape belongs to a single thread.
"""
import collections
import logging

import numpy as np

from koopman_uq.diffcore.ops import REGISTRY
from koopman_uq.exceptions import ContractError, NumericError, ShapeError

logger = logging.getLogger('tape')

LEAF_INPUT = 'input'
LEAF_CONST = 'const'

Record = collections.namedtuple('Record', ['op', 'parents', 'attrs', 'name'])


def real_array(values, checked=True, name='array'):
    """
    Converts `values` into a float64 RealArray
    :param values: anything numpy can convert
    :param checked: when True NaN/Inf values are rejected
    :param name: used in error messages
    :return: a float64 ndarray
    :raises NumericError: when checked and a value is not finite
    """
    arr = np.array(values, dtype=np.float64)
    if checked and not np.all(np.isfinite(arr)):
        raise NumericError(name, 'non-finite value in array')
    return arr


class Node(object):
    """
    Handle to one record of a Tape, with operator overloads that append
    further records
    """
    __slots__ = ('tape', 'index')

    # makes ndarray <op> Node defer to the Node's reflected operator
    __array_ufunc__ = None

    def __init__(self, tape, index):
        self.tape = tape
        self.index = index

    @property
    def value(self):
        return self.tape.values[self.index]

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def T(self):
        return self.tape.apply('transpose', self)

    def __repr__(self):
        rec = self.tape.records[self.index]
        return 'Node(%d, %s, shape=%s)' % (self.index, rec.op, self.shape)

    def __add__(self, other):
        return self.tape.apply('add', self, other)

    def __radd__(self, other):
        return self.tape.apply('add', other, self)

    def __sub__(self, other):
        return self.tape.apply('sub', self, other)

    def __rsub__(self, other):
        return self.tape.apply('sub', other, self)

    def __mul__(self, other):
        return self.tape.apply('mul', self, other)

    def __rmul__(self, other):
        return self.tape.apply('mul', other, self)

    def __truediv__(self, other):
        if isinstance(other, Node):
            raise ContractError(repr(self), 'division by a Node is not '
                                            'supported')
        return self.tape.apply('mul', self, 1.0 / np.asarray(other, float))

    def __neg__(self):
        return self.tape.apply('neg', self)

    def __matmul__(self, other):
        return self.tape.apply('matmul', self, other)

    def __rmatmul__(self, other):
        return self.tape.apply('matmul', other, self)

    def __getitem__(self, index):
        return self.tape.apply('getitem', self, index=index)

    def sum(self, axis=None):
        return self.tape.apply('sum', self, axis=axis)

    def mean(self, axis=None):
        return self.tape.apply('mean', self, axis=axis)


class Tape(object):
    """
    Append-only record of primitive operations
    """
    def __init__(self, checked=True):
        """
        Constructor
        :param checked: when True every computed value must be finite
        """
        self.checked = checked
        self.records = list()
        self.values = list()
        self.inputs = collections.OrderedDict()
        self.params = collections.OrderedDict()
        self.output = None

    def __len__(self):
        return len(self.records)

    def input(self, name, value, param=False):
        """
        Registers a named leaf
        :param name: unique input name
        :param value: the initial value
        :param param: when True backward() reports a gradient for it
        :return: the leaf Node
        """
        if name in self.inputs:
            raise ContractError(name, 'input already bound on this tape')
        node = self._append(Record(LEAF_INPUT, (), dict(), name),
                            real_array(value, self.checked, name))
        self.inputs[name] = node.index
        if param:
            self.params[name] = node.index
        return node

    def param(self, name, value):
        return self.input(name, value, param=True)

    def constant(self, value):
        value = real_array(value, self.checked, 'constant')
        return self._append(Record(LEAF_CONST, (), dict(value=value), None),
                            value)

    def lift(self, value):
        if isinstance(value, Node):
            if value.tape is not self:
                raise ContractError(repr(value), 'node belongs to another '
                                                 'tape')
            return value
        return self.constant(value)

    def apply(self, op, *parents, **attrs):
        """
        Appends and evaluates a primitive
        :param op: a name registered in koopman_uq.diffcore.ops
        :param parents: Nodes or raw values (raw values become constants)
        :param attrs: static keyword arguments of the primitive
        :return: the new Node
        """
        nodes = [self.lift(p) for p in parents]
        record = Record(op, tuple(n.index for n in nodes), attrs, None)
        value = self._evaluate(len(self.records), record,
                               [self.values[n.index] for n in nodes])
        return self._append(record, value)

    def set_output(self, node):
        self.output = self.lift(node).index
        return node

    def output_index(self):
        if self.output is not None:
            return self.output
        if not self.records:
            raise ContractError('tape', 'tape is empty')
        return len(self.records) - 1

    def forward(self, inputs=None):
        """
        Recomputes every record, rebinding the named inputs given
        :param inputs: dict of input name to new value
        :return: the value of the output node
        """
        inputs = inputs or dict()
        for name in inputs:
            if name not in self.inputs:
                raise ContractError(name, 'not an input of this tape')
        for index, record in enumerate(self.records):
            if record.op == LEAF_INPUT:
                if record.name in inputs:
                    value = real_array(inputs[record.name], self.checked,
                                       record.name)
                    if value.shape != self.values[index].shape:
                        raise ShapeError(
                            'node %d (%s)' % (index, record.name),
                            'bound shape %s, expected %s' % (
                                value.shape, self.values[index].shape))
                    self.values[index] = value
            elif record.op != LEAF_CONST:
                self.values[index] = self._evaluate(
                    index, record, [self.values[p] for p in record.parents])
        return self.values[self.output_index()]

    def backward(self, seed=1.0, cotangents=None):
        """
        Reverse pass from the scalar output node
        :param seed: cotangent of the output
        :param cotangents: optional dict of Node (or index) to extra
                           cotangent arrays injected at intermediate nodes
        :return: dict of param name to gradient, in registration order
        :raises ContractError: when the output is not a scalar
        """
        out_index = self.output_index()
        out_value = self.values[out_index]
        if out_value.size != 1:
            raise ContractError(
                'node %d (%s)' % (out_index, self.records[out_index].op),
                'backward needs a scalar output, got shape %s' % (
                    out_value.shape,))
        grads = [None] * len(self.records)
        grads[out_index] = np.full(out_value.shape, seed, dtype=np.float64)
        for key, cotangent in (cotangents or dict()).items():
            index = key.index if isinstance(key, Node) else key
            cotangent = np.asarray(cotangent, dtype=np.float64)
            if cotangent.shape != self.values[index].shape:
                raise ShapeError('node %d' % index,
                                 'cotangent shape %s, value shape %s' % (
                                     cotangent.shape,
                                     self.values[index].shape))
            grads[index] = cotangent if grads[index] is None \
                else grads[index] + cotangent

        for index in range(len(self.records) - 1, -1, -1):
            g = grads[index]
            record = self.records[index]
            if g is None or not record.parents:
                continue
            parent_values = [self.values[p] for p in record.parents]
            parent_grads = REGISTRY[record.op].vjp(
                g, self.values[index], *parent_values, **record.attrs)
            for parent, pg in zip(record.parents, parent_grads):
                pg = np.asarray(pg, dtype=np.float64)
                if grads[parent] is None:
                    grads[parent] = pg
                else:
                    grads[parent] = grads[parent] + pg

        out = collections.OrderedDict()
        for name, index in self.params.items():
            g = grads[index]
            out[name] = np.zeros_like(self.values[index]) if g is None \
                else np.array(g, dtype=np.float64)
        return out

    def _append(self, record, value):
        self.records.append(record)
        self.values.append(value)
        return Node(self, len(self.records) - 1)

    def _evaluate(self, index, record, parent_values):
        try:
            prim = REGISTRY[record.op]
        except KeyError:
            raise ContractError(record.op, 'unknown primitive')
        try:
            value = np.asarray(prim.forward(*parent_values, **record.attrs),
                               dtype=np.float64)
        except ValueError as e:
            raise ShapeError('node %d (%s)' % (index, record.op), str(e))
        if self.checked and not np.all(np.isfinite(value)):
            raise NumericError('node %d (%s)' % (index, record.op),
                               'numeric overflow: non-finite intermediate')
        return value


def forward(tape, inputs=None):
    return tape.forward(inputs)


def backward(tape, seed=1.0, cotangents=None):
    return tape.backward(seed=seed, cotangents=cotangents)

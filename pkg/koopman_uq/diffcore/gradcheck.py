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
import logging
import math

import numpy as np

from koopman_uq.exceptions import KoopmanUQError

logger = logging.getLogger('gradcheck')

KINK_OP = 'abs'


def grad_check(tape, params=None, eps=1e-4, skip_kinks=False,
               zero_floor=0.0):
    """
    Compares backward() against central finite differences
    (f(p + eps) - f(p - eps)) / (2 eps), coordinate by coordinate
    :param tape: a tape with a scalar output
    :param params: names of the params to check, defaults to all of them
    :param eps: the finite difference step, > 0
    :param skip_kinks: when True a coordinate whose stencil p +/- eps
                       changes the sign of any |.| argument is not scored
    :param zero_floor: coordinates where both |analytic| and |numeric|
                       are below this are roundoff and not scored
    :return: max over coordinates of |analytic - numeric| /
             max(1e-12, |analytic| + |numeric|), +inf on non-finite values
    """
    if eps <= 0:
        raise ValueError('eps must be > 0, got %s' % eps)
    names = list(params) if params is not None else list(tape.params)
    base = dict((name, tape.values[tape.inputs[name]].copy())
                for name in names)
    tape.forward()
    analytic = tape.backward()
    signs = kink_signs(tape) if skip_kinks else None

    worst = 0.0
    skipped = 0
    try:
        for name in names:
            flat = base[name].reshape(-1)
            grad = analytic[name].reshape(-1)
            for coord in range(flat.size):
                shifted = flat.copy()
                shifted[coord] = flat[coord] + eps
                f_plus = _evaluate(tape, name, shifted, base[name].shape)
                crossed = signs is not None and not _same_signs(
                    signs, tape)
                shifted[coord] = flat[coord] - eps
                f_minus = _evaluate(tape, name, shifted, base[name].shape)
                crossed = crossed or (signs is not None and not _same_signs(
                    signs, tape))
                numeric = (f_plus - f_minus) / (2.0 * eps)
                if not (math.isfinite(numeric) and math.isfinite(grad[coord])):
                    logger.warning('Non-finite difference at [%s][%d]',
                                   name, coord)
                    return float('inf')
                if crossed or max(abs(grad[coord]),
                                  abs(numeric)) < zero_floor:
                    skipped += 1
                    continue
                err = abs(grad[coord] - numeric) / max(
                    1e-12, abs(grad[coord]) + abs(numeric))
                if err > worst:
                    logger.debug('grad_check [%s][%d] analytic - [%s] '
                                 'numeric - [%s]', name, coord, grad[coord],
                                 numeric)
                    worst = err
            tape.forward({name: base[name]})
    finally:
        tape.forward(base)
    logger.debug('grad_check max relative error - [%s], skipped - [%s]',
                 worst, skipped)
    return worst


def kink_signs(tape):
    """
    Signs of every |.| argument currently on the tape
    """
    return [np.sign(tape.values[record.parents[0]])
            for record in tape.records if record.op == KINK_OP]


def _same_signs(signs, tape):
    return all(np.array_equal(a, b)
               for a, b in zip(signs, kink_signs(tape)))


def _evaluate(tape, name, flat, shape):
    try:
        return float(np.asarray(
            tape.forward({name: flat.reshape(shape)})).reshape(()))
    except KoopmanUQError as e:
        logger.warning('Forward failed during grad_check - [%s]', e)
        return float('nan')

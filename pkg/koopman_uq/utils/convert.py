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
import base64
import binascii
import logging
import struct

import numpy as np

'''
This package contains several helper functions for encoding to and decoding
from byte strings:
- little-endian unsigned 32-bit integers
- little-endian 64-bit floats
- float64 arrays as raw little-endian bytes and as base64 text
'''

logger = logging.getLogger('convert')

U32 = struct.Struct('<I')
F64 = struct.Struct('<d')
F64_DTYPE = np.dtype('<f8')


def encode_u32(number):
    if number < 0 or number >= 2 ** 32:
        raise SyntaxError(
            "Number, %d, does not fit in 32 unsigned bits" % number)
    return U32.pack(number)


def decode_u32(encoded, offset=0):
    return U32.unpack_from(encoded, offset)[0]


def encode_f64(value):
    return F64.pack(value)


def decode_f64(encoded, offset=0):
    return F64.unpack_from(encoded, offset)[0]


def encode_array(values):
    """
    Returns the row-major little-endian float64 bytes of `values`
    """
    arr = np.ascontiguousarray(values, dtype=F64_DTYPE)
    logger.debug('Encoding array of shape - [%s]', arr.shape)
    return arr.tobytes(order='C')


def decode_array(encoded, shape, offset=0):
    """
    Decodes row-major little-endian float64 bytes into an array of `shape`
    :param encoded: the byte string
    :param shape: the expected shape
    :param offset: where the array starts in `encoded`
    :return: a new, writable float64 ndarray
    :raises ValueError: when `encoded` holds too few bytes
    """
    count = int(np.prod(shape, dtype=np.int64))
    needed = count * F64_DTYPE.itemsize
    if len(encoded) - offset < needed:
        raise ValueError('Need %d bytes for shape %s, only %d available' % (
            needed, tuple(shape), len(encoded) - offset))
    arr = np.frombuffer(encoded, dtype=F64_DTYPE, count=count, offset=offset)
    return arr.astype(np.float64).reshape(shape)


def encode_b64(values):
    return base64.b64encode(encode_array(values)).decode('ascii')


def decode_b64(text, shape):
    """
    Inverse of encode_b64
    :raises ValueError: on invalid base64 or a size that does not match shape
    """
    try:
        raw = base64.b64decode(text.encode('ascii'), validate=True)
    except (binascii.Error, UnicodeEncodeError) as e:
        raise ValueError('Invalid base64 payload - %s' % e)
    count = int(np.prod(shape, dtype=np.int64))
    if len(raw) != count * F64_DTYPE.itemsize:
        raise ValueError('Payload holds %d bytes, shape %s needs %d' % (
            len(raw), tuple(shape), count * F64_DTYPE.itemsize))
    return decode_array(raw, shape)

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
KTS1 dataset files, all integers and floats little-endian:
    magic "KTS1" | u32 N | u32 T+1 | u32 n | u32 name-block length |
    UTF-8 channel names joined by '\n' | f64 dt | N*(T+1)*n f64 row-major
"""
import logging

import numpy as np

from koopman_uq.consts import KTS_MAGIC
from koopman_uq.dataio.dataset import TimeSeriesDataset
from koopman_uq.exceptions import DataFormatError, KoopmanUQError
from koopman_uq.utils import convert

logger = logging.getLogger('kts')

HEADER_FIELDS = ('N', 'T+1', 'n', 'name-block length')


def encode_dataset(dataset):
    names = '\n'.join(dataset.channels).encode('utf-8')
    shape = dataset.data.shape
    return b''.join([KTS_MAGIC, convert.encode_u32(shape[0]),
                     convert.encode_u32(shape[1]),
                     convert.encode_u32(shape[2]),
                     convert.encode_u32(len(names)), names,
                     convert.encode_f64(dataset.dt),
                     convert.encode_array(dataset.data)])


def decode_dataset(raw, path='<bytes>'):
    """
    Parses KTS1 bytes
    :raises DataFormatError: with the byte offset of the first bad field
    """
    if len(raw) < len(KTS_MAGIC) or raw[:len(KTS_MAGIC)] != KTS_MAGIC:
        raise DataFormatError(path, 'bad magic %r, expected %r' % (
            raw[:len(KTS_MAGIC)], KTS_MAGIC), offset=0)
    offset = len(KTS_MAGIC)
    header = dict()
    for field in HEADER_FIELDS:
        if len(raw) < offset + convert.U32.size:
            raise DataFormatError(path, 'truncated before %s' % field,
                                  offset=offset)
        header[field] = convert.decode_u32(raw, offset)
        offset += convert.U32.size
    count, length, dim = header['N'], header['T+1'], header['n']
    if count < 1 or length < 2 or dim < 1:
        raise DataFormatError(path, 'need N >= 1, T+1 >= 2, n >= 1, got '
                                    '%d, %d, %d' % (count, length, dim),
                              offset=len(KTS_MAGIC))

    name_end = offset + header['name-block length']
    if len(raw) < name_end:
        raise DataFormatError(path, 'truncated channel names', offset=offset)
    try:
        names = raw[offset:name_end].decode('utf-8').split('\n')
    except UnicodeDecodeError as e:
        raise DataFormatError(path, 'channel names are not UTF-8 - %s' % e,
                              offset=offset + e.start)
    if len(names) != dim:
        raise DataFormatError(path, '%d channel names for n = %d' % (
            len(names), dim), offset=offset)
    offset = name_end

    if len(raw) < offset + convert.F64.size:
        raise DataFormatError(path, 'truncated before dt', offset=offset)
    dt = convert.decode_f64(raw, offset)
    offset += convert.F64.size

    shape = (count, length, dim)
    try:
        data = convert.decode_array(raw, shape, offset)
    except ValueError as e:
        raise DataFormatError(path, 'truncated data - %s' % e, offset=offset)
    end = offset + data.size * convert.F64.size
    if len(raw) != end:
        raise DataFormatError(path, '%d trailing bytes' % (len(raw) - end),
                              offset=end)
    bad = np.flatnonzero(~np.isfinite(data))
    if bad.size:
        raise DataFormatError(path, 'non-finite value',
                              offset=offset + int(bad[0]) * convert.F64.size)
    try:
        return TimeSeriesDataset(data, names, dt, 'kts:%s' % path)
    except KoopmanUQError as e:
        raise DataFormatError(path, e.message)


def save_dataset(dataset, path):
    with open(path, 'wb') as f:
        f.write(encode_dataset(dataset))
    logger.info('Wrote dataset [%s] to [%s]', dataset.data.shape, path)


def load_dataset(path):
    """
    Reads a KTS1 file; nothing is returned unless the whole file parses
    """
    with open(path, 'rb') as f:
        raw = f.read()
    dataset = decode_dataset(raw, path)
    logger.info('Loaded dataset [%s] from [%s]', dataset.data.shape, path)
    return dataset

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
# Unit tests for kts.py
import logging
import os
import shutil
import struct
import sys
import tempfile
import unittest

import numpy as np

from koopman_uq.dataio.dataset import TimeSeriesDataset
from koopman_uq.dataio.kts import (decode_dataset, encode_dataset,
                                   load_dataset, save_dataset)
from koopman_uq.exceptions import DataFormatError

logging.basicConfig(stream=sys.stdout, level=logging.DEBUG)
logger = logging.getLogger('kts_tests')

# N = 1, T + 1 = 2, n = 1 with channel "x", dt = 0.1 and both states 0.5
MINIMAL_FILE = (b'KTS1' + struct.pack('<IIII', 1, 2, 1, 1) + b'x'
                + struct.pack('<d', 0.1) + struct.pack('<dd', 0.5, 0.5))


class KtsTests(unittest.TestCase):
    """
    Tests for the KTS1 dataset format
    """

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp_dir)

    def test_minimal_file(self):
        ds = decode_dataset(MINIMAL_FILE)
        self.assertEqual((1, 2, 1), ds.data.shape)
        self.assertEqual(['x'], ds.channels)
        self.assertEqual(0.1, ds.dt)
        np.testing.assert_array_equal([[[0.5], [0.5]]], ds.data)
        self.assertEqual(MINIMAL_FILE, encode_dataset(ds))

    def test_file_round_trip(self):
        rng = np.random.default_rng(11)
        ds = TimeSeriesDataset(rng.normal(size=(4, 7, 3)),
                               ['pos', u'velé', 'z'], 0.25)
        path = os.path.join(self.tmp_dir, 'data.kts')
        save_dataset(ds, path)
        loaded = load_dataset(path)
        np.testing.assert_array_equal(ds.data, loaded.data)
        self.assertEqual(ds.channels, loaded.channels)
        self.assertEqual(ds.dt, loaded.dt)

    def test_truncated(self):
        for cut in (2, 10, 21, 25, len(MINIMAL_FILE) - 1):
            with self.assertRaises(DataFormatError) as ctx:
                decode_dataset(MINIMAL_FILE[:cut], 'cut.kts')
            logger.debug('Rejected truncated file - [%s]', ctx.exception)
            self.assertIsNotNone(ctx.exception.offset)

    def test_bad_magic(self):
        with self.assertRaises(DataFormatError) as ctx:
            decode_dataset(b'KTS2' + MINIMAL_FILE[4:])
        self.assertEqual(0, ctx.exception.offset)

    def test_trailing_bytes(self):
        with self.assertRaises(DataFormatError) as ctx:
            decode_dataset(MINIMAL_FILE + b'\x00')
        self.assertEqual(len(MINIMAL_FILE), ctx.exception.offset)

    def test_non_finite(self):
        raw = MINIMAL_FILE[:-8] + struct.pack('<d', float('nan'))
        with self.assertRaises(DataFormatError) as ctx:
            decode_dataset(raw)
        self.assertEqual(len(MINIMAL_FILE) - 8, ctx.exception.offset)

    def test_name_count_mismatch(self):
        raw = (b'KTS1' + struct.pack('<IIII', 1, 2, 1, 3) + b'x\ny'
               + MINIMAL_FILE[21:])
        with self.assertRaises(DataFormatError):
            decode_dataset(raw)

    def test_no_transitions(self):
        raw = b'KTS1' + struct.pack('<IIII', 1, 1, 1, 1) + b'x' + \
            struct.pack('<dd', 0.1, 0.5)
        with self.assertRaises(DataFormatError):
            decode_dataset(raw)

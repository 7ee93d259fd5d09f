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
# Unit tests for workers.py
import logging
import os
import sys
import threading
import unittest
from concurrent.futures import ThreadPoolExecutor

import mock

from koopman_uq.consts import THREADS_ENV
from koopman_uq.exceptions import ConfigError
from koopman_uq.utils.workers import WorkerPool, ordered_map, worker_count

logging.basicConfig(stream=sys.stdout, level=logging.DEBUG)
logger = logging.getLogger('workers_tests')


class WorkersTests(unittest.TestCase):
    """
    Tests for the worker pool policy
    """

    @mock.patch.dict(os.environ, {THREADS_ENV: '3'})
    def test_environment_cap(self):
        self.assertEqual(3, worker_count(16))
        self.assertEqual(2, worker_count(2))

    @mock.patch.dict(os.environ, {THREADS_ENV: 'many'})
    def test_bad_cap(self):
        with self.assertRaises(ConfigError):
            worker_count()

    @mock.patch('psutil.cpu_count', return_value=None)
    def test_unknown_cpu_count(self, cpu_count):
        with mock.patch.dict(os.environ, {THREADS_ENV: ''}):
            self.assertEqual(1, worker_count())
        cpu_count.assert_called_once_with()

    def test_order_preserved(self):
        threads = set()

        def square(x):
            threads.add(threading.current_thread().name)
            return x * x

        self.assertEqual([x * x for x in range(50)],
                         ordered_map(square, range(50), workers=4))
        self.assertEqual([], ordered_map(square, [], workers=4))
        logger.debug('Used threads - [%s]', threads)

    @mock.patch.dict(os.environ, {THREADS_ENV: '4'})
    def test_pool_reused(self):
        with mock.patch('koopman_uq.utils.workers.ThreadPoolExecutor',
                        wraps=ThreadPoolExecutor) as executor:
            with WorkerPool(4) as pool:
                for shift in range(5):
                    self.assertEqual(
                        [x + shift for x in range(10)],
                        ordered_map(lambda x: x + shift, range(10),
                                    pool=pool))
            self.assertEqual(1, executor.call_count)
        self.assertIsNone(pool.executor)

    def test_single_worker_pool_is_serial(self):
        with WorkerPool(1) as pool:
            self.assertIsNone(pool.executor)
            self.assertEqual([threading.current_thread().name] * 3,
                             pool.map(lambda x: threading.current_thread()
                                      .name, range(3)))

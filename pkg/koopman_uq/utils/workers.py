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
import os
from concurrent.futures import ThreadPoolExecutor

import psutil

from koopman_uq.consts import THREADS_ENV
from koopman_uq.exceptions import ConfigError

logger = logging.getLogger('workers')


def worker_count(requested=None):
    """
    Resolves the worker pool size
    :param requested: an explicit size, None for the machine default
    :return: the size, capped by the KOOPMAN_UQ_THREADS environment variable
    """
    count = requested or psutil.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            cap = int(cap)
        except ValueError:
            raise ConfigError(THREADS_ENV, 'must be an integer, got %r' % cap)
        if cap < 1:
            raise ConfigError(THREADS_ENV, 'must be >= 1, got %d' % cap)
        count = min(count, cap)
    return max(1, int(count))


def ordered_map(func, items, workers=None, pool=None):
    """
    Applies `func` to every item, possibly concurrently
    :param pool: an open WorkerPool to run on instead of a fresh executor
    :return: the results in item order, independent of the pool size
    """
    if pool is not None:
        return pool.map(func, items)
    items = list(items)
    count = min(worker_count(workers), len(items))
    if count <= 1:
        return [func(item) for item in items]
    logger.debug('Mapping [%d] items over [%d] workers', len(items), count)
    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(func, items))


class WorkerPool(object):
    """
    A thread pool kept open across many ordered maps
    """
    def __init__(self, workers=None):
        self.size = worker_count(workers)
        self.executor = None

    def __enter__(self):
        if self.size > 1:
            logger.debug('Opening a pool of [%d] workers', self.size)
            self.executor = ThreadPoolExecutor(max_workers=self.size)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None

    def map(self, func, items):
        items = list(items)
        if self.executor is None or len(items) <= 1:
            return [func(item) for item in items]
        return list(self.executor.map(func, items))

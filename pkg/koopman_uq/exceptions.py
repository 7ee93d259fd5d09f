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
from koopman_uq.consts import EXIT_DATA, EXIT_NUMERIC, EXIT_USAGE


class KoopmanUQError(Exception):
    """Base class for koopman-uq exceptions in this package."""
    exit_code = EXIT_DATA

    def __init__(self, expression, message):
        Exception.__init__(self, expression, message)
        self.expression = expression
        self.message = message

    def __str__(self):
        return 'Error on ' + str(self.expression) + ':  ' + self.message


class ShapeError(KoopmanUQError):
    """Exception raised when array shapes or widths do not line up.
    Attributes:
        expression -- the node, field or parameter with the bad shape
        message -- explanation of the error
    """

    def __init__(self, expression, message):
        KoopmanUQError.__init__(self, expression, message)


class NumericError(KoopmanUQError):
    """Exception raised on non-finite values or a diverging computation.
    Attributes:
        expression -- the node or quantity that went non-finite
        message -- explanation of the error
    """
    exit_code = EXIT_NUMERIC

    def __init__(self, expression, message):
        KoopmanUQError.__init__(self, expression, message)


class ContractError(KoopmanUQError):
    """Exception raised when a caller breaks an operation's precondition."""

    def __init__(self, expression, message):
        KoopmanUQError.__init__(self, expression, message)


class ConfigError(KoopmanUQError):
    """Exception raised for invalid configuration values or flags.
    Attributes:
        expression -- the flag or config field name
        message -- explanation of the error
    """
    exit_code = EXIT_USAGE

    def __init__(self, key, message):
        KoopmanUQError.__init__(self, key, message)


class DataFormatError(KoopmanUQError):
    """Exception raised for malformed dataset or checkpoint files.
    Attributes:
        expression -- the file path
        message -- explanation of the error, with the byte offset or field
    """

    def __init__(self, path, message, offset=None):
        if offset is not None:
            message = 'byte offset {}: {}'.format(offset, message)
        KoopmanUQError.__init__(self, path, message)
        self.offset = offset

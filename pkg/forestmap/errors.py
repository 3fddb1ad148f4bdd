# Copyright 2021 Agnostiq Inc.
#
# This file is part of Forestmap.
#
# Licensed under the Apache License 2.0 (the "License"). A copy of the
# License may be obtained with this software package or at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Use of this file is prohibited except in compliance with the License.
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Exceptions raised by forestmap."""

from typing import Optional


class ForestmapError(Exception):
    """Base class for all forestmap errors."""


class DataError(ForestmapError):
    """The input data violates a documented format or value constraint."""


class UsageError(ForestmapError):
    """An API or command line call was made with incompatible arguments."""


class BackendFailure(ForestmapError):
    """A neighbor backend failed to answer a query."""


# Data errors


class ParseError(DataError):
    def __init__(self, line: int, reason: str, path: Optional[str] = None):
        self.line = line
        self.reason = reason
        self.path = path
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {reason}")


class DimensionMismatch(DataError):
    def __init__(self, expected: int, found: int, line: Optional[int] = None):
        self.expected = expected
        self.found = found
        self.line = line
        suffix = f" at line {line}" if line is not None else ""
        super().__init__(f"Expected dimension {expected} but found {found}{suffix}")


class EmptyInput(DataError):
    pass


class EmptySet(DataError):
    pass


class ZeroVector(DataError):
    pass


class NegativeWeight(DataError):
    pass


class _EdgeEntryError(DataError):
    def __init__(self, index: int, reason: str):
        self.index = index
        super().__init__(f"Edge entry {index}: {reason}")


class SelfLoop(_EdgeEntryError):
    pass


class NodeOutOfRange(_EdgeEntryError):
    pass


class NonFiniteWeight(_EdgeEntryError):
    pass


class MetadataLengthMismatch(DataError):
    pass


class MetricMismatch(DataError):
    pass


class SizeMismatch(DataError):
    pass


class OutputUnwritable(DataError):
    pass


# Usage errors


class ModeMismatch(UsageError):
    pass


class LengthMismatch(UsageError):
    pass


class ConfigMismatch(UsageError):
    pass


class HeterogeneousSignatures(UsageError):
    pass


class IncompatibleQuery(UsageError):
    pass


class UnknownId(UsageError):
    pass

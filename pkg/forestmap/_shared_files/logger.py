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

"""Package-wide logger."""

import logging
import sys

from ..errors import UsageError
from .config import get_config

LOG_LEVELS = ("debug", "info", "warning", "error", "critical")

logger_level = get_config("sdk.log_level").upper()

app_log = logging.getLogger("forestmap")
app_log.setLevel(logger_level)

if not app_log.handlers:
    log_handler = logging.StreamHandler(sys.stderr)
    log_formatter = logging.Formatter(
        "[%(asctime)s,%(msecs)03d] [%(levelname)s] %(message)s", "%Y-%m-%d %H:%M:%S"
    )
    log_handler.setFormatter(log_formatter)
    app_log.addHandler(log_handler)
    app_log.propagate = False


def set_log_level(level: str) -> None:
    """Change the package log level at runtime (used by the CLI)."""
    if level.lower() not in LOG_LEVELS:
        raise UsageError(f"Unknown log level {level!r}, expected one of {', '.join(LOG_LEVELS)}")
    app_log.setLevel(level.upper())

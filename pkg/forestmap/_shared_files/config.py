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

"""Default configuration values and the get_config lookup."""

import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel

from ..errors import UsageError

ENV_PREFIX = "FORESTMAP"


class HashingDefaults(BaseModel):
    d: int = 512
    seed: int = 42
    mode: str = "binary"


class LshForestDefaults(BaseModel):
    l: int = 8  # noqa: E741


class KnnGraphDefaults(BaseModel):
    k: int = 10
    kc: int = 10


class LayoutDefaults(BaseModel):
    p: float = 1.0
    iterations_per_level: int = 200
    theta: float = 1.0
    coarsest_size: int = 32
    step_decay: float = 0.97
    repulsion: float = 0.2
    seed: int = 42


class SdkDefaults(BaseModel):
    """
    Values that are not tied to a single pipeline phase
    """

    log_level: str = "warning"
    n_jobs: int = 1


_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "hashing": HashingDefaults().model_dump(),
    "lsh": LshForestDefaults().model_dump(),
    "knng": KnnGraphDefaults().model_dump(),
    "layout": LayoutDefaults().model_dump(),
    "sdk": SdkDefaults().model_dump(),
}


def _coerce(env_name: str, raw: str, default: Any) -> Any:
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise UsageError(f"{env_name}={raw!r} is not a valid {type(default).__name__}") from None
    return raw


def get_config(key: str) -> Any:
    """Look up a configuration value such as ``"layout.p"``.

    The environment variable ``FORESTMAP_<SECTION>_<KEY>`` takes precedence over
    the built-in default.

    Args:
        key: Dotted ``section.name`` key.

    Returns:
        The configured value, typed like its default.

    Raises:
        UsageError: The environment value cannot be read as the default's type.
    """
    section, _, name = key.partition(".")
    try:
        default = _DEFAULTS[section][name]
    except KeyError as e:
        raise KeyError(f"Unknown configuration key {key!r}") from e

    env_name = f"{ENV_PREFIX}_{section}_{name}".upper()
    if (raw := os.environ.get(env_name)) is not None:
        return _coerce(env_name, raw, default)
    return default


def load_environment(dotenv_path: Optional[str] = None) -> bool:
    """Load ``FORESTMAP_*`` overrides from a ``.env`` file, if one exists."""
    return load_dotenv(dotenv_path=dotenv_path, override=False)

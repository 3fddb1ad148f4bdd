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

"""Conversions of dense rows to binary sets and seeded synthetic corpora."""

from enum import Enum
from typing import List, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .hashing import MAX_ELEMENT, SparseBinarySet


class BinarizeRule(str, Enum):
    MEAN = "mean"
    NONZERO = "nonzero"


def binarize_by_mean(row) -> SparseBinarySet:
    """Indices of the entries strictly above the row's mean intensity."""
    row = np.asarray(row, dtype=np.float64)
    return SparseBinarySet(np.flatnonzero(row > row.mean()))


def sparse_from_dense_binary(row) -> SparseBinarySet:
    """Indices of the non-zero entries of a dense binary vector."""
    return SparseBinarySet(np.flatnonzero(np.asarray(row)))


def binarize_rows(
    matrix: np.ndarray, rule: Union[BinarizeRule, str] = BinarizeRule.MEAN
) -> List[SparseBinarySet]:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if BinarizeRule(rule) is BinarizeRule.MEAN:
        mask = matrix > matrix.mean(axis=1, keepdims=True)
    else:
        mask = matrix != 0
    return [SparseBinarySet(np.flatnonzero(row)) for row in mask]


class SyntheticSetSpec(BaseModel):
    """Prototype-and-mutation generator of binary sets.

    Every item copies one of ``n_prototypes`` random sets of ``set_size`` elements
    drawn from ``[0, universe)`` and replaces each element with probability
    ``mutation_rate``.
    """

    model_config = ConfigDict(frozen=True)

    set_size: int = 128
    universe: int = 1 << 20
    n_prototypes: int = 100
    mutation_rate: float = 0.2

    @field_validator("set_size", "n_prototypes")
    @classmethod
    def _check_positive(cls, value: int, info) -> int:
        if value < 1:
            raise ValueError(f"{info.field_name} must be at least 1, got {value}")
        return value

    @field_validator("mutation_rate")
    @classmethod
    def _check_rate(cls, value: float) -> float:
        if not 0 <= value <= 1:
            raise ValueError(f"mutation_rate must lie in [0, 1], got {value}")
        return value

    @model_validator(mode="after")
    def _check_universe(self) -> "SyntheticSetSpec":
        if not self.set_size <= self.universe <= MAX_ELEMENT + 1:
            raise ValueError("universe must hold set_size elements and fit in 32 bits")
        return self


def synthetic_binary_sets(spec: SyntheticSetSpec, n: int, seed: int = 0) -> List[SparseBinarySet]:
    """Draw ``n`` sets; identical arguments give identical sets."""
    rng = np.random.default_rng(seed)
    prototypes = np.stack(
        [
            rng.choice(spec.universe, size=spec.set_size, replace=False)
            for _ in range(spec.n_prototypes)
        ]
    )
    items = prototypes[rng.integers(spec.n_prototypes, size=n)]
    mutated = rng.random(items.shape) < spec.mutation_rate
    items[mutated] = rng.integers(spec.universe, size=int(mutated.sum()))
    return [SparseBinarySet(np.unique(row)) for row in items]

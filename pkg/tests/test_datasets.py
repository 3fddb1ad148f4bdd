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

"""Unit tests for binarization and synthetic data."""

import numpy as np
import pytest
from pydantic import ValidationError

from forestmap.datasets import (
    SyntheticSetSpec,
    binarize_by_mean,
    binarize_rows,
    sparse_from_dense_binary,
    synthetic_binary_sets,
)


def test_binarize_by_mean():
    """Test that only entries strictly above the row mean are kept."""
    assert binarize_by_mean([0, 2, 4, 6]).elements.tolist() == [2, 3]
    assert binarize_by_mean([1, 1, 1]).elements.tolist() == []


def test_sparse_from_dense_binary():
    """Test that the non-zero positions become elements."""
    assert sparse_from_dense_binary([0, 1, 0, 1, 1]).elements.tolist() == [1, 3, 4]


@pytest.mark.parametrize(
    "rule, expected", [("mean", [[2, 3], [0]]), ("nonzero", [[1, 2, 3], [0, 1]])]
)
def test_binarize_rows(rule, expected):
    """Test both binarization rules over a matrix."""
    matrix = np.array([[0, 2, 4, 6], [9, 1, 0, 0]])
    assert [s.elements.tolist() for s in binarize_rows(matrix, rule)] == expected


class TestSyntheticSets:
    MOCK_SPEC = SyntheticSetSpec(set_size=16, universe=1000, n_prototypes=5, mutation_rate=0.1)

    def test_deterministic(self):
        """Test that the same seed draws the same sets and another seed does not."""
        first = synthetic_binary_sets(self.MOCK_SPEC, 50, seed=1)
        assert first == synthetic_binary_sets(self.MOCK_SPEC, 50, seed=1)
        assert first != synthetic_binary_sets(self.MOCK_SPEC, 50, seed=2)

    def test_shape(self):
        """Test set sizes and element ranges."""
        sets = synthetic_binary_sets(self.MOCK_SPEC, 40, seed=3)
        assert len(sets) == 40
        assert all(1 <= len(s) <= 16 for s in sets)
        assert all(s.elements.max() < 1000 for s in sets)

    def test_unmutated_copies(self):
        """Test that without mutation every set is one of the prototypes."""
        spec = self.MOCK_SPEC.model_copy(update={"mutation_rate": 0.0})
        sets = synthetic_binary_sets(spec, 30, seed=4)
        assert len({s.elements.tobytes() for s in sets}) <= 5
        assert all(len(s) == 16 for s in sets)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"set_size": 0},
            {"n_prototypes": 0},
            {"mutation_rate": 1.5},
            {"set_size": 10, "universe": 5},
            {"universe": 1 << 33},
        ],
    )
    def test_invalid(self, kwargs):
        """Test that impossible generator settings are rejected."""
        with pytest.raises(ValidationError):
            SyntheticSetSpec(**kwargs)

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

"""Unit tests for the Barnes-Hut repulsion."""

import numpy as np
import pytest

from forestmap.quadtree import JITTER_SCALE, quadtree_repulsion, separate_coincident

MOCK_REPULSION = 0.2


def _exact_repulsion(coords, p, repulsion=MOCK_REPULSION):
    delta = coords[:, None, :] - coords[None, :, :]
    d2 = np.sum(delta**2, axis=2)
    np.fill_diagonal(d2, np.inf)
    return repulsion * p * p * np.sum(delta / d2[:, :, None], axis=1)


class TestQuadtreeRepulsion:
    def test_two_points(self):
        """Test that two points push each other apart along their axis."""
        forces = quadtree_repulsion(np.array([[0.0, 0.0], [1.0, 0.0]]), 1.0, 1.0)
        assert forces == pytest.approx(np.array([[-0.2, 0.0], [0.2, 0.0]]))

    def test_scales_with_p(self):
        """Test that the repulsion grows with the square of p."""
        coords = np.array([[0.0, 0.0], [0.0, 2.0]])
        forces = quadtree_repulsion(coords, 1.0, 3.0, repulsion=1.0)
        assert forces[1] == pytest.approx([0.0, 4.5])

    def test_small_inputs(self):
        """Test that zero or one point feels no force."""
        assert quadtree_repulsion(np.zeros((0, 2)), 1.0, 1.0).shape == (0, 2)
        assert np.array_equal(quadtree_repulsion(np.ones((1, 2)), 1.0, 1.0), np.zeros((1, 2)))

    def test_exact_for_small_theta(self):
        """Test that a vanishing theta matches the double loop."""
        coords = np.random.default_rng(0).random((100, 2))
        forces = quadtree_repulsion(coords, 1e-12, 1.0, repulsion=MOCK_REPULSION)
        assert np.max(np.abs(forces - _exact_repulsion(coords, 1.0))) <= 1e-9

    @pytest.mark.parametrize("sampler", ["normal", "random"])
    def test_approximation_error(self, sampler):
        """Test that theta = 1 keeps the mean per-node relative error within 5%."""
        coords = getattr(np.random.default_rng(1), sampler)(size=(500, 2))
        exact = _exact_repulsion(coords, 1.0)
        forces = quadtree_repulsion(coords, 1.0, 1.0, repulsion=MOCK_REPULSION)
        relative = np.linalg.norm(forces - exact, axis=1) / np.linalg.norm(exact, axis=1)
        assert relative.mean() <= 0.05

    def test_deep_clusters(self):
        """Test that tight clusters deeper than the initial capacity are handled exactly."""
        rng = np.random.default_rng(2)
        centers = rng.random((20, 2))
        coords = np.concatenate([c + 1e-9 * np.arange(5)[:, None] for c in centers])
        exact = _exact_repulsion(coords, 1.0)
        forces = quadtree_repulsion(coords, 1e-12, 1.0, repulsion=MOCK_REPULSION)
        assert np.max(np.abs(forces - exact)) <= 1e-6 * np.max(np.abs(exact))

    def test_deterministic(self):
        """Test that repeated calls give bit-identical forces."""
        coords = np.random.default_rng(3).random((300, 2))
        assert np.array_equal(
            quadtree_repulsion(coords, 1.0, 1.0), quadtree_repulsion(coords, 1.0, 1.0)
        )

    def test_coincident_points(self):
        """Test that coincident points get finite forces."""
        coords = np.array([[0.5, 0.5]] * 3 + [[0.0, 0.0]])
        forces = quadtree_repulsion(coords, 1.0, 1.0)
        assert np.all(np.isfinite(forces))
        assert np.any(forces[1] != 0)


class TestSeparateCoincident:
    def test_unchanged_without_repeats(self):
        """Test that distinct points are returned as they are."""
        coords = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert np.array_equal(separate_coincident(coords, 1.0), coords)

    def test_repeats_move(self):
        """Test that all but the first of each group move by p * 1e-4."""
        coords = np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [0.0, 0.0]])
        separated = separate_coincident(coords, 2.0, seed=5)
        shift = np.linalg.norm(separated - coords, axis=1)
        assert shift[[0, 1]].tolist() == [0.0, 0.0]
        assert shift[[2, 3, 4]] == pytest.approx([2 * JITTER_SCALE] * 3)
        assert np.array_equal(separated, separate_coincident(coords, 2.0, seed=5))
        assert not np.array_equal(separated, separate_coincident(coords, 2.0, seed=6))

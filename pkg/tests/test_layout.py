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

"""Unit tests for the multilevel layout."""

import numpy as np
import pytest
from pydantic import ValidationError

from forestmap.knng import graph_from_edge_list
from forestmap.layout import LayoutConfig, LevelGraph, coarsen, layout
from forestmap.mst import kruskal

MOCK_CONFIG = LayoutConfig(iterations_per_level=60, seed=42)


def _random_forest(n, seed=0, n_trees=1):
    """Random recursive trees over consecutive id blocks."""
    rng = np.random.default_rng(seed)
    bounds = np.linspace(0, n, n_trees + 1).astype(int)
    entries = [
        (i, int(rng.integers(low, i)), float(rng.random()))
        for low, high in zip(bounds[:-1], bounds[1:])
        for i in range(low + 1, high)
    ]
    return kruskal(graph_from_edge_list(entries, n))


def _path(n):
    return LevelGraph(
        n=n, u=np.arange(n - 1), v=np.arange(1, n), w=np.ones(n - 1, dtype=np.float64)
    )


def _mean_edge_length(result):
    return np.mean(np.linalg.norm(result.coords[result.u] - result.coords[result.v], axis=1))


class TestLayoutConfig:
    def test_defaults(self):
        """Test the configured defaults."""
        config = LayoutConfig()
        assert config.p == 1.0
        assert config.iterations_per_level == 200
        assert config.theta == 1.0
        assert config.coarsest_size == 32
        assert config.step_decay == 0.97
        assert config.repulsion == 0.2

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"p": 0},
            {"p": float("inf")},
            {"theta": -1.0},
            {"coarsest_size": 1},
            {"step_decay": 1.0},
            {"iterations_per_level": 0},
            {"seed": -1},
        ],
    )
    def test_invalid(self, kwargs):
        """Test that invalid parameters are rejected."""
        with pytest.raises(ValidationError):
            LayoutConfig(**kwargs)


class TestCoarsen:
    def test_small_tree(self):
        """Test that a tree already below the coarsest size is not contracted."""
        hierarchy = coarsen(_path(2), 32)
        assert hierarchy.depth == 0
        assert hierarchy.coarsest.n == 2

    def test_path_halves(self):
        """Test that one contraction of a 64-node path leaves 32 or 33 nodes."""
        hierarchy = coarsen(_path(64), 32)
        assert 32 <= hierarchy.levels[1].n <= 33
        assert hierarchy.parents[0].size == 64

    def test_levels_are_trees(self):
        """Test that every level of a random tree's hierarchy is a tree with sorted edges."""
        forest = _random_forest(500, seed=3)
        tree = LevelGraph(n=forest.n, u=forest.u, v=forest.v, w=forest.w)
        hierarchy = coarsen(tree, 8)
        assert hierarchy.coarsest.n < 500
        for coarser, parent in zip(hierarchy.levels[1:], hierarchy.parents):
            assert parent.max() == coarser.n - 1
        for level in hierarchy.levels:
            assert len(level) == level.n - 1
            assert np.all(level.u < level.v)
            keys = list(zip(level.w.tolist(), level.u.tolist(), level.v.tolist()))
            assert keys == sorted(keys)

    def test_star_stops(self):
        """Test that coarsening stops when matchings barely contract."""
        n = 200
        star = LevelGraph(
            n=n, u=np.zeros(n - 1, dtype=np.int64), v=np.arange(1, n), w=np.ones(n - 1)
        )
        hierarchy = coarsen(star, 8)
        assert hierarchy.depth == 1
        assert hierarchy.coarsest.n == n - 1


class TestLayout:
    def test_single_node(self):
        """Test that one node sits at the origin."""
        result = layout(kruskal(graph_from_edge_list([], 1)), MOCK_CONFIG)
        assert result.coords.tolist() == [[0.0, 0.0]]

    def test_two_nodes(self):
        """Test that two nodes settle symmetrically at the force equilibrium."""
        result = layout(kruskal(graph_from_edge_list([(0, 1, 0.5)], 2)), LayoutConfig(seed=1))
        a, b = result.coords
        assert np.all(np.isfinite(result.coords))
        assert a == pytest.approx(-b)
        assert np.linalg.norm(a - b) == pytest.approx(0.2 ** (1 / 3), abs=0.02)

    def test_neighbors_are_close(self):
        """Test that tree neighbors are at least twice closer than random pairs."""
        result = layout(_random_forest(1000, seed=1), MOCK_CONFIG)
        rng = np.random.default_rng(0)
        a, b = rng.integers(1000, size=(2, 1000))
        keep = a != b
        random_mean = np.mean(
            np.linalg.norm(result.coords[a[keep]] - result.coords[b[keep]], axis=1)
        )

        assert result.n == 1000
        assert np.all(np.isfinite(result.coords))
        assert 2 * _mean_edge_length(result) <= random_mean

    def test_sparseness_grows_with_p(self):
        """Test that the mean edge length strictly increases with p."""
        forest = _random_forest(500, seed=2)
        lengths = [
            _mean_edge_length(layout(forest, MOCK_CONFIG.model_copy(update={"p": p})))
            for p in (0.5, 1.0, 2.0)
        ]
        assert lengths[0] < lengths[1] < lengths[2]
        assert lengths[2] == pytest.approx(2 * lengths[1])

    def test_components_do_not_overlap(self):
        """Test that packed component boxes are disjoint and contain their members."""
        forest = _random_forest(300, seed=4, n_trees=5)
        result = layout(forest, MOCK_CONFIG)
        boxes = result.component_boxes
        assert boxes.shape == (5, 4)

        for c in range(5):
            members = result.coords[result.component == c]
            assert np.all(members >= boxes[c, :2] - 1e-9)
            assert np.all(members <= boxes[c, 2:] + 1e-9)
            for other in range(c + 1, 5):
                disjoint = (
                    boxes[c, 2] < boxes[other, 0]
                    or boxes[other, 2] < boxes[c, 0]
                    or boxes[c, 3] < boxes[other, 1]
                    or boxes[other, 3] < boxes[c, 1]
                )
                assert disjoint

    def test_centered(self):
        """Test that the bounding box of the drawing is centered on the origin."""
        result = layout(_random_forest(100, seed=5, n_trees=3), MOCK_CONFIG)
        low, high = result.coords.min(axis=0), result.coords.max(axis=0)
        assert low + high == pytest.approx([0.0, 0.0], abs=1e-9)

    def test_deterministic(self):
        """Test that layouts are bit-identical across runs and thread counts."""
        forest = _random_forest(400, seed=6, n_trees=2)
        first = layout(forest, MOCK_CONFIG, n_jobs=1)
        second = layout(forest, MOCK_CONFIG, n_jobs=2)
        assert np.array_equal(first.coords, second.coords)
        assert first.tree_edges == second.tree_edges

    def test_seed_changes_layout(self):
        """Test that a different seed gives a different drawing."""
        forest = _random_forest(50, seed=7)
        first = layout(forest, MOCK_CONFIG)
        second = layout(forest, MOCK_CONFIG.model_copy(update={"seed": 43}))
        assert not np.array_equal(first.coords, second.coords)

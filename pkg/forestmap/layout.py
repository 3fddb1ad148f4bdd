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

"""Multilevel spring-electrical layout of spanning forests."""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numba
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ._shared_files.config import get_config
from ._shared_files.logger import app_log
from .hashing import MAX_SEED
from .mst import SpanningForest
from .quadtree import quadtree_repulsion
from .utils import _numba_threads

# a level that merges fewer nodes than this share ends coarsening
MIN_CONTRACTION = 0.05
CHILD_OFFSET = 0.1
COMPONENT_GAP = 4.0


class LayoutConfig(BaseModel):
    """Parameters of the force-directed layout.

    Attributes:
        p: Point size; scales ideal edge length and repulsion.
        iterations_per_level: Force steps run on every level of the hierarchy.
        theta: Opening criterion of the quadtree force approximation.
        coarsest_size: Coarsening stops once a level has at most this many nodes.
        step_decay: Factor applied to the step length after every iteration.
        seed: Seed of all random placements.
        repulsion: Repulsion constant ``C``.
    """

    model_config = ConfigDict(frozen=True)

    p: float = Field(default_factory=lambda: get_config("layout.p"))
    iterations_per_level: int = Field(
        default_factory=lambda: get_config("layout.iterations_per_level")
    )
    theta: float = Field(default_factory=lambda: get_config("layout.theta"))
    coarsest_size: int = Field(default_factory=lambda: get_config("layout.coarsest_size"))
    step_decay: float = Field(default_factory=lambda: get_config("layout.step_decay"))
    seed: int = Field(default_factory=lambda: get_config("layout.seed"))
    repulsion: float = Field(default_factory=lambda: get_config("layout.repulsion"))

    @field_validator("p", "theta", "repulsion")
    @classmethod
    def _check_positive(cls, value: float, info) -> float:
        if not value > 0 or not np.isfinite(value):
            raise ValueError(f"{info.field_name} must be a positive number, got {value}")
        return value

    @field_validator("iterations_per_level")
    @classmethod
    def _check_iterations(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"iterations_per_level must be at least 1, got {value}")
        return value

    @field_validator("coarsest_size")
    @classmethod
    def _check_coarsest_size(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"coarsest_size must be at least 2, got {value}")
        return value

    @field_validator("step_decay")
    @classmethod
    def _check_step_decay(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"step_decay must lie in (0, 1), got {value}")
        return value

    @field_validator("seed")
    @classmethod
    def _check_seed(cls, value: int) -> int:
        if not 0 <= value <= MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {value}")
        return value


@dataclass(frozen=True, eq=False)
class LevelGraph:
    """A tree on local node ids ``0..n-1`` with edges sorted by ``(w, u, v)``."""

    n: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __len__(self) -> int:
        return int(self.u.size)


@dataclass(frozen=True, eq=False)
class Hierarchy:
    """Levels from finest to coarsest; ``parents[i]`` maps level ``i`` nodes to level ``i + 1``."""

    levels: List[LevelGraph]
    parents: List[np.ndarray]

    @property
    def depth(self) -> int:
        return len(self.parents)

    @property
    def coarsest(self) -> LevelGraph:
        return self.levels[-1]


@dataclass(frozen=True, eq=False)
class LayoutResult:
    """Final coordinates with the tree they draw.

    ``component_boxes[c]`` is the ``(x_min, y_min, x_max, y_max)`` box of component ``c``.
    """

    coords: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    component: np.ndarray
    component_boxes: np.ndarray

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def tree_edges(self) -> List[Tuple[int, int, float]]:
        return list(zip(self.u.tolist(), self.v.tolist(), self.w.tolist()))


def _sorted_level(n: int, a: np.ndarray, b: np.ndarray, w: np.ndarray) -> LevelGraph:
    u, v = np.minimum(a, b), np.maximum(a, b)
    order = np.lexsort((v, u, w))
    return LevelGraph(n=n, u=u[order], v=v[order], w=w[order])


@numba.njit(cache=True)
def _greedy_matching(n, u, v):
    mate = np.full(n, -1, dtype=np.int64)
    matched = 0
    for e in range(u.size):
        if mate[u[e]] < 0 and mate[v[e]] < 0:
            mate[u[e]] = v[e]
            mate[v[e]] = u[e]
            matched += 1

    parent = np.full(n, -1, dtype=np.int64)
    n_parents = 0
    for i in range(n):
        if parent[i] < 0:
            parent[i] = n_parents
            if mate[i] >= 0:
                parent[mate[i]] = n_parents
            n_parents += 1
    return mate, parent, n_parents, matched


def coarsen(tree: LevelGraph, coarsest_size: Optional[int] = None) -> Hierarchy:
    """Contract greedy maximal matchings, lightest edges first, until the tree is small.

    Args:
        tree: One connected tree component.
        coarsest_size: Stop once a level has at most this many nodes.

    Returns:
        The hierarchy; every level is again a tree.
    """
    coarsest_size = coarsest_size or get_config("layout.coarsest_size")
    levels, parents = [tree], []
    current = tree
    while current.n > coarsest_size and len(current):
        mate, parent, n_parents, matched = _greedy_matching(current.n, current.u, current.v)
        kept = mate[current.u] != current.v
        current = _sorted_level(
            n_parents, parent[current.u[kept]], parent[current.v[kept]], current.w[kept]
        )
        levels.append(current)
        parents.append(parent)
        if matched < MIN_CONTRACTION * parent.size:
            break
    return Hierarchy(levels=levels, parents=parents)


def _refine(pos: np.ndarray, level: LevelGraph, config: LayoutConfig) -> np.ndarray:
    p = config.p
    step = p
    for _ in range(config.iterations_per_level):
        force = quadtree_repulsion(pos, config.theta, p, config.seed, config.repulsion)

        delta = pos[level.v] - pos[level.u]
        length = np.hypot(delta[:, 0], delta[:, 1])[:, None]
        pull = delta * length / p
        np.add.at(force, level.u, pull)
        np.subtract.at(force, level.v, pull)

        norm = np.hypot(force[:, 0], force[:, 1])[:, None]
        move = np.divide(force, norm, out=np.zeros_like(force), where=norm > 0)
        pos = pos + step * move
        assert np.isfinite(pos).all(), "layout produced a non-finite coordinate"
        step *= config.step_decay
    return pos


def _random_directions(rng: np.random.Generator, count: int) -> np.ndarray:
    angles = rng.uniform(0.0, 2.0 * np.pi, count)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def _layout_tree(tree: LevelGraph, config: LayoutConfig, rng: np.random.Generator) -> np.ndarray:
    if tree.n == 1:
        return np.zeros((1, 2))

    hierarchy = coarsen(tree, config.coarsest_size)
    coarsest = hierarchy.coarsest
    radius = config.p * np.sqrt(coarsest.n) * np.sqrt(rng.uniform(0.0, 1.0, coarsest.n))
    pos = radius[:, None] * _random_directions(rng, coarsest.n)
    pos = _refine(pos, coarsest, config)

    for level, parent in zip(reversed(hierarchy.levels[:-1]), reversed(hierarchy.parents)):
        offsets = CHILD_OFFSET * config.p * _random_directions(rng, level.n)
        pos = _refine(pos[parent] + offsets, level, config)
    return pos


def _split_components(forest: SpanningForest) -> List[Tuple[np.ndarray, LevelGraph]]:
    n_components = forest.n_components
    node_order = np.argsort(forest.component, kind="stable")
    node_bounds = np.searchsorted(forest.component[node_order], np.arange(n_components + 1))

    edge_label = forest.component[forest.u]
    edge_order = np.argsort(edge_label, kind="stable")
    edge_bounds = np.searchsorted(edge_label[edge_order], np.arange(n_components + 1))

    parts = []
    for label in range(n_components):
        members = node_order[node_bounds[label] : node_bounds[label + 1]]
        edges = edge_order[edge_bounds[label] : edge_bounds[label + 1]]
        tree = LevelGraph(
            n=members.size,
            u=np.searchsorted(members, forest.u[edges]),
            v=np.searchsorted(members, forest.v[edges]),
            w=forest.w[edges],
        )
        parts.append((members, tree))
    return parts


def _pack_components(
    placed: List[np.ndarray], sizes: np.ndarray, p: float
) -> Tuple[List[np.ndarray], np.ndarray]:
    """Place components on a grid, largest first, separated by ``4 * p * sqrt(size)``."""
    n_components = len(placed)
    order = np.lexsort((np.arange(n_components), -sizes))
    columns = int(np.ceil(np.sqrt(n_components)))

    shifted: List[Optional[np.ndarray]] = [None] * n_components
    boxes = np.zeros((n_components, 4))
    cursor_x = cursor_y = row_height = 0.0
    for slot, label in enumerate(order):
        if slot and slot % columns == 0:
            cursor_x = 0.0
            cursor_y += row_height
            row_height = 0.0

        pos = placed[label]
        low, high = pos.min(axis=0), pos.max(axis=0)
        pos = pos - low + np.array([cursor_x, cursor_y])
        shifted[label] = pos
        width, height = high - low
        boxes[label] = [cursor_x, cursor_y, cursor_x + width, cursor_y + height]

        gap = COMPONENT_GAP * p * np.sqrt(sizes[label])
        cursor_x += width + gap
        row_height = max(row_height, height + gap)
    return shifted, boxes


def layout(
    forest: SpanningForest, config: Optional[LayoutConfig] = None, n_jobs: int = 1
) -> LayoutResult:
    """Lay out every tree of a spanning forest in the plane.

    Each component is coarsened and refined level by level, the components are
    packed on a grid by descending size, and the drawing is translated so that its
    bounding box is centered on the origin.

    Args:
        forest: The spanning forest.
        config: Layout parameters.
        n_jobs: Number of threads of the force kernel.

    Returns:
        Coordinates and component boxes; identical for identical inputs.
    """
    config = config or LayoutConfig()
    parts = _split_components(forest)

    placed = []
    with _numba_threads(n_jobs):
        for label, (_, tree) in enumerate(parts):
            rng = np.random.default_rng([config.seed, label])
            placed.append(_layout_tree(tree, config, rng))

    sizes = np.array([tree.n for _, tree in parts], dtype=np.int64)
    shifted, boxes = _pack_components(placed, sizes, config.p)

    coords = np.zeros((forest.n, 2))
    for (members, _), pos in zip(parts, shifted):
        coords[members] = pos

    if forest.n:
        center = 0.5 * (coords.min(axis=0) + coords.max(axis=0))
        coords = coords - center + 0.0
        boxes = boxes - np.tile(center, 2) + 0.0

    app_log.debug(f"Layout: {forest.n} nodes in {len(parts)} components (p={config.p})")
    return LayoutResult(
        coords=coords,
        u=forest.u,
        v=forest.v,
        w=forest.w,
        component=forest.component,
        component_boxes=boxes,
    )

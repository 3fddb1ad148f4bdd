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

"""Minimum spanning forests with Kruskal's algorithm."""

from dataclasses import dataclass
from typing import List, Tuple

import numba
import numpy as np
from scipy.sparse.csgraph import connected_components

from ._shared_files.logger import app_log
from .knng import WeightedGraph, to_adjacency


@numba.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _union(parent, rank, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return False
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    if rank[ra] == rank[rb]:
        rank[ra] += 1
    return True


@numba.njit(cache=True)
def _all_roots(parent):
    roots = np.empty(parent.size, dtype=np.int64)
    for i in range(parent.size):
        roots[i] = _find(parent, i)
    return roots


@numba.njit(cache=True)
def _kruskal_scan(parent, rank, u, v, limit):
    accepted = np.zeros(u.size, dtype=np.bool_)
    count = 0
    for e in range(u.size):
        if count == limit:
            break
        if _union(parent, rank, u[e], v[e]):
            accepted[e] = True
            count += 1
    return accepted


class UnionFind:
    """Disjoint sets over ``0..n-1`` with union by rank and path compression."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.rank = np.zeros(n, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.parent.size)

    def find(self, x: int) -> int:
        return int(_find(self.parent, np.int64(x)))

    def union(self, a: int, b: int) -> bool:
        """Join the sets of ``a`` and ``b``; False when they were already joined."""
        return bool(_union(self.parent, self.rank, np.int64(a), np.int64(b)))

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)


@dataclass(frozen=True, eq=False)
class SpanningForest:
    """Tree edges in ``(w, u, v)`` order and dense component labels.

    Labels run ``0..c-1`` in order of each component's smallest node id.
    """

    n: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    component: np.ndarray

    def __len__(self) -> int:
        return int(self.u.size)

    @property
    def tree_edges(self) -> List[Tuple[int, int, float]]:
        return list(zip(self.u.tolist(), self.v.tolist(), self.w.tolist()))

    @property
    def n_components(self) -> int:
        return int(self.component.max()) + 1 if self.n else 0

    def as_graph(self) -> WeightedGraph:
        return WeightedGraph(n=self.n, u=self.u, v=self.v, w=self.w)

    def component_members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.component == label)


def _smallest_member_labels(n: int, labels: np.ndarray) -> np.ndarray:
    smallest = np.full(labels.max() + 1 if n else 0, n, dtype=np.int64)
    np.minimum.at(smallest, labels, np.arange(n, dtype=np.int64))
    return smallest[labels]


def kruskal(graph: WeightedGraph) -> SpanningForest:
    """Minimum spanning forest of a canonical graph.

    Edges are scanned in their ``(w, u, v)`` order, so equal weights are resolved
    by node ids and the result is unique.

    Args:
        graph: Canonical graph; it may be disconnected or have no edges.

    Returns:
        The spanning forest with ``n - c`` tree edges.
    """
    union_find = UnionFind(graph.n)
    accepted = _kruskal_scan(
        union_find.parent, union_find.rank, graph.u, graph.v, max(graph.n - 1, 0)
    )

    roots = _all_roots(union_find.parent)
    _, dense = np.unique(_smallest_member_labels(graph.n, roots), return_inverse=True)

    forest = SpanningForest(
        n=graph.n,
        u=graph.u[accepted],
        v=graph.v[accepted],
        w=graph.w[accepted],
        component=dense.astype(np.int64).reshape(-1),
    )
    assert len(forest) + forest.n_components == graph.n
    app_log.debug(
        f"Spanning forest: {len(forest)} of {len(graph)} edges kept, "
        f"{forest.n_components} components"
    )
    return forest


def components(forest: SpanningForest) -> np.ndarray:
    """Label every node with the smallest node id of its tree."""
    if forest.n == 0:
        return np.zeros(0, dtype=np.int64)
    _, labels = connected_components(to_adjacency(forest.as_graph()), directed=False)
    return _smallest_member_labels(forest.n, labels)


def total_weight(forest: SpanningForest) -> float:
    return float(np.sum(forest.w))

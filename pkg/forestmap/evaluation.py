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

"""Locality preservation measures of a tree embedding."""

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import cdist

from ._shared_files.logger import app_log
from .errors import MetricMismatch, SizeMismatch
from .hashing import SparseBinarySet, WeightedVector
from .knng import to_adjacency
from .mst import SpanningForest
from .utils import _numba_threads

HISTOGRAM_CAP = 100

# entries of a dense distance block
_BLOCK_ENTRIES = 1 << 24


class Metric(str, Enum):
    JACCARD = "jaccard"
    WEIGHTED_JACCARD = "weighted-jaccard"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True, eq=False)
class NnTable:
    """Exact nearest neighbor of every item and its distance."""

    neighbor: np.ndarray
    distance: np.ndarray

    def __len__(self) -> int:
        return int(self.neighbor.size)


@dataclass(frozen=True, eq=False)
class RankReport:
    """Competition rank of every item's true nearest neighbor under an embedded distance."""

    ranks: np.ndarray
    preservation_rate: float

    def __len__(self) -> int:
        return int(self.ranks.size)

    def histogram(self, cap: int = HISTOGRAM_CAP) -> Tuple[np.ndarray, int]:
        """Counts of ranks ``1..cap`` and the number of ranks above ``cap``."""
        counts = np.bincount(np.minimum(self.ranks, cap + 1), minlength=cap + 2)
        return counts[1 : cap + 1], int(counts[cap + 1])


@dataclass(frozen=True)
class PhaseTimings:
    """Wall-clock seconds of the pipeline phases; skipped phases report zero."""

    index: float
    knng: float
    mst: float
    layout: float
    total: float

    def as_line(self, n: Optional[int] = None) -> str:
        prefix = f"n={n} " if n is not None else ""
        return (
            f"{prefix}index={self.index:.3f} knng={self.knng:.3f} mst={self.mst:.3f} "
            f"layout={self.layout:.3f} total={self.total:.3f}"
        )


Items = Union[Sequence[SparseBinarySet], Sequence[WeightedVector], np.ndarray]


def _dense_rows(items: Items, metric: Metric) -> np.ndarray:
    if isinstance(items, np.ndarray):
        return np.atleast_2d(items).astype(np.float64)
    if all(isinstance(item, WeightedVector) for item in items):
        widths = {item.dim for item in items}
        if len(widths) > 1:
            raise MetricMismatch(
                f"{metric.value} needs vectors of one width, got {sorted(widths)}"
            )
        return np.vstack([item.weights for item in items])
    raise MetricMismatch(f"{metric.value} needs dense vectors, not binary sets")


def _set_matrix(items: Items) -> sp.csr_matrix:
    if isinstance(items, np.ndarray) or not all(isinstance(s, SparseBinarySet) for s in items):
        raise MetricMismatch("jaccard needs sparse binary sets")
    indptr = np.zeros(len(items) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in items], out=indptr[1:])
    indices = np.concatenate([s.elements for s in items]).astype(np.int64)
    data = np.ones(indices.size, dtype=np.float64)
    width = int(indices.max()) + 1 if indices.size else 1
    return sp.csr_matrix((data, indices, indptr), shape=(len(items), width))


def _row_blocks(n: int):
    block = max(1, _BLOCK_ENTRIES // max(n, 1))
    for start in range(0, n, block):
        yield start, min(n, start + block)


def _nearest_in_block(distances: np.ndarray, start: int) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.arange(distances.shape[0])
    distances[rows, rows + start] = np.inf
    best = np.argmin(distances, axis=1)
    return best, distances[rows, best]


@numba.njit(parallel=True, cache=True)
def _weighted_jaccard_nn(weights):
    n = weights.shape[0]
    totals = weights.sum(axis=1)
    neighbor = np.empty(n, dtype=np.int64)
    distance = np.empty(n)
    for i in numba.prange(n):
        best = -1
        best_distance = np.inf
        for j in range(n):
            if j == i:
                continue
            shared = np.minimum(weights[i], weights[j]).sum()
            union = totals[i] + totals[j] - shared
            d = 1.0 - shared / union if union > 0 else 0.0
            if d < best_distance:
                best = j
                best_distance = d
        neighbor[i] = best
        distance[i] = best_distance
    return neighbor, distance


def true_nearest_neighbors(items: Items, metric: Union[Metric, str], n_jobs: int = 1) -> NnTable:
    """Exact nearest neighbor of every item in the input space, ties by smallest id.

    Args:
        items: Sparse binary sets for ``jaccard``; weighted vectors or a 2-D array otherwise.
        metric: ``jaccard``, ``weighted-jaccard`` or ``euclidean``.
        n_jobs: Number of threads of the weighted Jaccard scan.

    Raises:
        MetricMismatch: The items cannot be compared under ``metric``.
        SizeMismatch: Fewer than two items.
    """
    metric = Metric(metric)
    n = len(items)
    if n < 2:
        raise SizeMismatch(f"Nearest neighbors need at least 2 items, got {n}")

    neighbor = np.empty(n, dtype=np.int64)
    distance = np.empty(n, dtype=np.float64)
    if metric is Metric.JACCARD:
        matrix = _set_matrix(items)
        sizes = np.asarray(matrix.sum(axis=1)).ravel()
        for start, stop in _row_blocks(n):
            shared = (matrix[start:stop] @ matrix.T).toarray()
            union = sizes[start:stop, None] + sizes[None, :] - shared
            block = 1.0 - shared / union
            neighbor[start:stop], distance[start:stop] = _nearest_in_block(block, start)
    elif metric is Metric.EUCLIDEAN:
        rows = _dense_rows(items, metric)
        for start, stop in _row_blocks(n):
            block = cdist(rows[start:stop], rows, "euclidean")
            neighbor[start:stop], distance[start:stop] = _nearest_in_block(block, start)
    else:
        rows = _dense_rows(items, metric)
        with _numba_threads(n_jobs):
            neighbor, distance = _weighted_jaccard_nn(np.ascontiguousarray(rows))

    app_log.debug(f"Exact {metric.value} nearest neighbors of {n} items")
    return NnTable(neighbor=neighbor, distance=distance)


def _check_size(n: int, table: NnTable) -> None:
    if n != len(table):
        raise SizeMismatch(f"Embedding covers {n} items but the neighbor table has {len(table)}")


@numba.njit(parallel=True, cache=True)
def _hop_ranks(indptr, indices, targets):
    n = targets.size
    ranks = np.empty(n, dtype=np.int64)
    hops = np.full(n, -1, dtype=np.int64)
    for i in numba.prange(n):
        depth = np.full(n, -1, dtype=np.int64)
        queue = np.empty(n, dtype=np.int64)
        depth[i] = 0
        queue[0] = i
        head = 0
        tail = 1
        found = False
        while head < tail and not found:
            node = queue[head]
            head += 1
            for e in range(indptr[node], indptr[node + 1]):
                other = indices[e]
                if depth[other] < 0:
                    depth[other] = depth[node] + 1
                    queue[tail] = other
                    tail += 1
                    if other == targets[i]:
                        found = True
        if found:
            hop = depth[targets[i]]
            closer = 0
            for t in range(1, tail):
                if depth[queue[t]] < hop:
                    closer += 1
            ranks[i] = closer + 1
            hops[i] = hop
        else:
            # every other member of the component is strictly closer
            ranks[i] = tail
    return ranks, hops


def topological_ranks(forest: SpanningForest, nn_table: NnTable, n_jobs: int = 1) -> RankReport:
    """Rank true nearest neighbors by hop distance along the tree.

    Items in another component are farther than every reachable item. An item is
    preserved when its true nearest neighbor is adjacent to it in the tree.
    """
    _check_size(forest.n, nn_table)
    adjacency = to_adjacency(forest.as_graph())
    with _numba_threads(n_jobs):
        ranks, hops = _hop_ranks(
            adjacency.indptr.astype(np.int64),
            adjacency.indices.astype(np.int64),
            nn_table.neighbor.astype(np.int64),
        )
    return RankReport(ranks=ranks, preservation_rate=float(np.mean(hops == 1)))


@numba.njit(parallel=True, cache=True)
def _euclidean_ranks(coords, targets):
    n = targets.size
    ranks = np.empty(n, dtype=np.int64)
    for i in numba.prange(n):
        dx = coords[i, 0] - coords[targets[i], 0]
        dy = coords[i, 1] - coords[targets[i], 1]
        reference = dx * dx + dy * dy
        closer = 0
        for j in range(n):
            if j == i:
                continue
            dx = coords[i, 0] - coords[j, 0]
            dy = coords[i, 1] - coords[j, 1]
            if dx * dx + dy * dy < reference:
                closer += 1
        ranks[i] = closer + 1
    return ranks


def euclidean_ranks(coords: np.ndarray, nn_table: NnTable, n_jobs: int = 1) -> RankReport:
    """Rank true nearest neighbors by planar distance in the layout."""
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    _check_size(coords.shape[0], nn_table)
    with _numba_threads(n_jobs):
        ranks = _euclidean_ranks(coords, nn_table.neighbor.astype(np.int64))
    return RankReport(ranks=ranks, preservation_rate=float(np.mean(ranks == 1)))


def rank_histogram_csv(report: RankReport, cap: int = HISTOGRAM_CAP) -> str:
    """``rank,count`` rows for ranks ``1..cap`` followed by a ``>cap`` overflow row."""
    counts, overflow = report.histogram(cap)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["rank", "count"])
    writer.writerows((rank, int(count)) for rank, count in enumerate(counts, start=1))
    writer.writerow([f">{cap}", overflow])
    return buffer.getvalue()


def neighbor_hop_distances(
    forest: SpanningForest, query_id: int, neighbor_ids: Sequence[int]
) -> np.ndarray:
    """Hop distances from ``query_id`` to each given node; ``inf`` across components."""
    hops = shortest_path(
        to_adjacency(forest.as_graph()), method="D", unweighted=True, indices=query_id
    )
    return hops[np.asarray(neighbor_ids, dtype=np.int64)]


def mean_topological_distance(forest: SpanningForest, samples: int = 1000, seed: int = 0) -> float:
    """Mean hop distance between random distinct nodes of the same component."""
    rng = np.random.default_rng(seed)
    sizes = np.bincount(forest.component)
    eligible = np.flatnonzero(sizes[forest.component] > 1)
    if eligible.size == 0:
        return 0.0

    sources = rng.choice(eligible, size=samples)
    adjacency = to_adjacency(forest.as_graph())
    totals: List[float] = []
    for start in range(0, samples, 64):
        chunk = sources[start : start + 64]
        hops = shortest_path(adjacency, method="D", unweighted=True, indices=chunk)
        for row, source in enumerate(chunk):
            members = forest.component_members(forest.component[source])
            target = source
            while target == source:
                target = members[rng.integers(members.size)]
            totals.append(hops[row, target])
    return float(np.mean(totals))

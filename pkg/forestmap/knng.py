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

"""Undirected weighted c-approximate k-nearest-neighbor graphs."""

from dataclasses import dataclass
from functools import partial
from typing import Iterable, Iterator, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ._shared_files.config import get_config
from ._shared_files.logger import app_log
from .errors import (
    BackendFailure,
    ForestmapError,
    NodeOutOfRange,
    NonFiniteWeight,
    SelfLoop,
    UnknownId,
)
from .hashing import Signature, SignatureMatrix, signature_distances, stack_signatures
from .lsh_forest import Neighbor, _check_k, _to_neighbors
from .utils import _chunk_ranges, _execute_partials_in_threadpool


class KnnGraphConfig(BaseModel):
    """``k`` neighbors per node, harvested with a candidate budget of ``k * kc``."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(default_factory=lambda: get_config("knng.k"))
    kc: int = Field(default_factory=lambda: get_config("knng.kc"))

    @field_validator("k", "kc")
    @classmethod
    def _check_positive(cls, value: int, info) -> int:
        if value < 1:
            raise ValueError(f"{info.field_name} must be at least 1, got {value}")
        return value


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Canonical undirected graph: ``u < v``, no duplicates, sorted by ``(w, u, v)``."""

    n: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __len__(self) -> int:
        return int(self.u.size)

    def __iter__(self) -> Iterator[Tuple[int, int, float]]:
        return zip(self.u.tolist(), self.v.tolist(), self.w.tolist())

    @property
    def edges(self) -> List[Tuple[int, int, float]]:
        return list(self)


class NeighborBackend(Protocol):
    def query_knn(self, query_id: int, k: int, kc: int) -> List[Neighbor]:
        ...


class ExactKnnBackend:
    """Exhaustive scan over estimated signature distances, ties broken by ascending id."""

    def __init__(self, signatures: Union[SignatureMatrix, Sequence[Signature]]):
        self.signatures = stack_signatures(signatures)

    @property
    def n(self) -> int:
        return len(self.signatures)

    def query_knn(self, query_id: int, k: int, kc: int = 1) -> List[Neighbor]:
        if not 0 <= int(query_id) < self.n:
            raise UnknownId(f"Item id {query_id} is not in [0, {self.n})")
        _check_k(k, kc)
        components = self.signatures.components
        distances = signature_distances(components, components[query_id])
        distances[query_id] = np.inf
        ids = np.arange(self.n, dtype=np.int64)
        return _to_neighbors(ids, distances, min(k, self.n - 1))

    def batch_query_knn(
        self, ids: Sequence[int], k: int, kc: int = 1, n_jobs: int = 1
    ) -> List[List[Neighbor]]:
        def _query_range(chunk: range) -> List[List[Neighbor]]:
            return [self.query_knn(ids[i], k, kc) for i in chunk]

        partials = [partial(_query_range, chunk) for chunk in _chunk_ranges(len(ids), 4 * n_jobs)]
        results = []
        for chunk_result in _execute_partials_in_threadpool(partials, n_jobs):
            results.extend(chunk_result)
        return results


def exact_knn_backend(signatures: Union[SignatureMatrix, Sequence[Signature]]) -> ExactKnnBackend:
    return ExactKnnBackend(signatures)


def _canonical_graph(n: int, a: np.ndarray, b: np.ndarray, w: np.ndarray) -> WeightedGraph:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    u, v = np.minimum(a, b), np.maximum(a, b)

    # keep the lightest copy of every undirected pair
    order = np.lexsort((w, v, u))
    u, v, w = u[order], v[order], w[order]
    keep = np.ones(u.size, dtype=bool)
    keep[1:] = (u[1:] != u[:-1]) | (v[1:] != v[:-1])
    u, v, w = u[keep], v[keep], w[keep]

    order = np.lexsort((v, u, w))
    return WeightedGraph(n=n, u=u[order], v=v[order], w=w[order])


def _query_all(backend: NeighborBackend, n: int, config: KnnGraphConfig, n_jobs: int):
    ids = list(range(n))
    if hasattr(backend, "batch_query_knn"):
        return backend.batch_query_knn(ids, config.k, config.kc, n_jobs=n_jobs)

    partials = [partial(backend.query_knn, i, config.k, config.kc) for i in ids]
    return _execute_partials_in_threadpool(partials, n_jobs)


def build_knn_graph(
    backend: NeighborBackend,
    n: int,
    config: Optional[KnnGraphConfig] = None,
    n_jobs: int = 1,
) -> WeightedGraph:
    """Connect every node to the neighbors its backend reports.

    Args:
        backend: Anything answering ``query_knn(i, k, kc)`` for ``i < n``.
        n: Number of nodes.
        config: ``k`` and ``kc``.
        n_jobs: Number of threads issuing queries.

    Returns:
        The canonical graph; it may be disconnected.

    Raises:
        BackendFailure: The backend raised or reported an invalid neighbor.
    """
    config = config or KnnGraphConfig()
    try:
        results = _query_all(backend, n, config, n_jobs)
    except ForestmapError:
        raise
    except Exception as e:
        raise BackendFailure(f"Neighbor backend failed: {e}") from e

    sources, targets, weights = [], [], []
    for i, neighbors in enumerate(results):
        for neighbor in neighbors:
            if not 0 <= neighbor.id < n or neighbor.id == i:
                raise BackendFailure(f"Backend returned invalid neighbor {neighbor.id} for {i}")
            sources.append(i)
            targets.append(neighbor.id)
            weights.append(neighbor.distance)

    graph = _canonical_graph(n, sources, targets, weights)
    app_log.debug(f"k-NN graph: {n} nodes, {len(graph)} edges (k={config.k}, kc={config.kc})")
    return graph


def graph_from_edge_list(entries: Iterable[Sequence[float]], n: int) -> WeightedGraph:
    """Build a canonical graph from ``(u, v, w)`` entries.

    Duplicate undirected pairs keep their minimum weight.

    Raises:
        SelfLoop, NodeOutOfRange, NonFiniteWeight: naming the offending entry index.
    """
    sources, targets, weights = [], [], []
    for index, (a, b, w) in enumerate(entries):
        a, b, w = int(a), int(b), float(w)
        if not (0 <= a < n and 0 <= b < n):
            raise NodeOutOfRange(index, f"node id outside [0, {n})")
        if a == b:
            raise SelfLoop(index, f"self-loop on node {a}")
        if not np.isfinite(w):
            raise NonFiniteWeight(index, f"weight {w} is not finite")
        sources.append(a)
        targets.append(b)
        weights.append(w)
    return _canonical_graph(n, sources, targets, weights)


def degrees(graph: WeightedGraph) -> np.ndarray:
    return np.bincount(np.concatenate([graph.u, graph.v]), minlength=graph.n)


def to_adjacency(graph: WeightedGraph, weighted: bool = False) -> sp.csr_matrix:
    """Symmetric sparse adjacency; unit entries unless ``weighted``."""
    data = graph.w if weighted else np.ones(len(graph), dtype=np.float64)
    rows = np.concatenate([graph.u, graph.v])
    cols = np.concatenate([graph.v, graph.u])
    return sp.csr_matrix(
        (np.concatenate([data, data]), (rows, cols)), shape=(graph.n, graph.n)
    )

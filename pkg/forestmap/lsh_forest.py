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

"""LSH Forest index over MinHash signatures.

Each of the ``l`` trees owns one chunk of ``d / l`` signature components. A tree is
stored as its chunks sorted lexicographically (column-major, so every prefix column
is contiguous) next to the item ids in the same order; a prefix of length ``p`` then
selects one contiguous range found by successive binary searches.

Queries descend synchronously over all trees from the full chunk length towards a
prefix length of one, until at least ``k * kc`` distinct candidates are collected.
The candidates are re-ranked by their full-signature distance.
"""

from dataclasses import dataclass
from functools import partial
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ._shared_files.config import get_config
from ._shared_files.logger import app_log
from .errors import (
    ConfigMismatch,
    EmptyInput,
    HeterogeneousSignatures,
    IncompatibleQuery,
    UnknownId,
    UsageError,
)
from .hashing import HashingMode, Signature, SignatureMatrix, signature_distances, stack_signatures
from .utils import _chunk_ranges, _execute_partials_in_threadpool


class LshForestConfig(BaseModel):
    """Number of prefix trees; the signature length ``d`` comes from the hashing config."""

    model_config = ConfigDict(frozen=True)

    l: int = Field(default_factory=lambda: get_config("lsh.l"))  # noqa: E741

    @field_validator("l")
    @classmethod
    def _check_l(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"l must be at least 1, got {value}")
        return value

    def chunk_length(self, d: int) -> int:
        """Components per tree; raises ConfigMismatch unless ``l`` divides ``d``."""
        if d % self.l != 0:
            message = f"l must divide d (l={self.l}, d={d})"
            app_log.error(f"{message}. Please choose a number of trees that divides d.")
            raise ConfigMismatch(message)
        return d // self.l


@dataclass(frozen=True)
class Neighbor:
    id: int
    distance: float


def _to_neighbors(ids: np.ndarray, distances: np.ndarray, k: int) -> List[Neighbor]:
    order = np.lexsort((ids, distances))[:k]
    return [Neighbor(int(ids[i]), float(distances[i])) for i in order]


class LshForest:
    """Immutable LSH Forest over ``n`` signatures.

    Use :func:`build_index` or :class:`LshForestBuilder` to create one.
    """

    def __init__(
        self,
        signatures: SignatureMatrix,
        config: LshForestConfig,
        keys: Sequence[np.ndarray],
        ids: Sequence[np.ndarray],
    ):
        self.signatures = signatures
        self.config = config
        self.chunk_length = config.chunk_length(signatures.d)
        self._keys = tuple(keys)
        self._ids = tuple(ids)

    @property
    def n(self) -> int:
        return len(self.signatures)

    @property
    def d(self) -> int:
        return self.signatures.d

    @property
    def l(self) -> int:  # noqa: E741, E743
        return self.config.l

    @property
    def mode(self) -> HashingMode:
        return self.signatures.mode

    def tree(self, index: int):
        """Return ``(chunks, ids)`` of one tree; ``chunks`` has shape ``(n, chunk_length)``."""
        return self._keys[index].T, self._ids[index]

    def _debug_log(self, message):
        app_log.debug(f"LSH Forest: {message}")

    def _check_query(self, query: Union[Signature, np.ndarray]) -> np.ndarray:
        if isinstance(query, Signature):
            if query.mode is not self.mode:
                raise IncompatibleQuery(
                    f"Query is a {query.mode.value} signature, index holds {self.mode.value}"
                )
            components = query.components
        else:
            components = np.asarray(query, dtype=np.uint64)
        if components.shape != (self.d,):
            raise IncompatibleQuery(f"Query has {components.size} components, index has {self.d}")
        return components

    def _check_id(self, item_id: int) -> int:
        if not 0 <= int(item_id) < self.n:
            raise UnknownId(f"Item id {item_id} is not in [0, {self.n})")
        return int(item_id)

    def _prefix_ranges(self, tree: int, chunk: np.ndarray) -> np.ndarray:
        """Sorted-order range ``[lo, hi)`` of every prefix length ``0..chunk_length``."""
        keys = self._keys[tree]
        m = self.chunk_length
        ranges = np.empty((m + 1, 2), dtype=np.int64)
        lo, hi = 0, self.n
        ranges[0] = (lo, hi)

        for depth in range(m):
            if hi - lo == 1:
                # a single row is left: compare its remaining components directly
                mismatch = np.flatnonzero(keys[depth:, lo] != chunk[depth:])
                stop = depth + (int(mismatch[0]) if mismatch.size else m - depth)
                ranges[depth + 1 : stop + 1] = (lo, hi)
                ranges[stop + 1 :] = (lo, lo)
                return ranges

            column = keys[depth, lo:hi]
            value = chunk[depth]
            lo, hi = (
                lo + int(np.searchsorted(column, value, side="left")),
                lo + int(np.searchsorted(column, value, side="right")),
            )
            ranges[depth + 1] = (lo, hi)
            if lo == hi:
                ranges[depth + 2 :] = (lo, lo)
                return ranges

        return ranges

    def _harvest(self, components: np.ndarray, budget: int, exclude: Optional[int]) -> np.ndarray:
        m = self.chunk_length
        tree_ranges = [
            self._prefix_ranges(tree, components[tree * m : (tree + 1) * m])
            for tree in range(self.l)
        ]

        candidates = np.empty(0, dtype=np.int64)
        for depth in range(m, 0, -1):
            spans = [(int(r[depth, 0]), int(r[depth, 1])) for r in tree_ranges]
            upper_bound = sum(hi - lo for lo, hi in spans)
            if depth > 1 and upper_bound - (exclude is not None) < budget:
                continue

            candidates = np.unique(
                np.concatenate([ids[lo:hi] for ids, (lo, hi) in zip(self._ids, spans)])
            )
            if exclude is not None:
                candidates = candidates[candidates != exclude]
            if candidates.size >= budget:
                break

        return candidates

    def query_candidates(self, query: Union[Signature, np.ndarray], budget: int) -> np.ndarray:
        """Ids whose chunks share the longest prefixes with the query, at least ``budget``
        of them unless the prefixes are exhausted.

        Args:
            query: A signature compatible with this index.
            budget: Number of distinct candidates after which the descent stops.

        Returns:
            Sorted array of candidate ids.
        """
        if budget < 1:
            raise UsageError(f"budget must be positive, got {budget}")
        return self._harvest(self._check_query(query), budget, exclude=None)

    def query_linear_scan(
        self, query: Union[Signature, np.ndarray], ids: Sequence[int], k: int
    ) -> List[Neighbor]:
        """Rank ``ids`` by full-signature distance to ``query`` and keep the ``k`` closest."""
        components = self._check_query(query)
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            return []
        if ids.min() < 0 or ids.max() >= self.n:
            raise UnknownId(f"Candidate ids must lie in [0, {self.n})")
        distances = signature_distances(self.signatures.components[ids], components)
        return _to_neighbors(ids, distances, k)

    def query_knn(self, query_id: int, k: int, kc: int) -> List[Neighbor]:
        """Approximate ``k`` nearest neighbors of an indexed item, itself excluded.

        Candidates are harvested with a budget of ``k * kc`` and re-ranked by full
        signature distance; ties are broken by ascending id.
        """
        query_id = self._check_id(query_id)
        _check_k(k, kc)
        components = self.signatures.components[query_id]
        candidates = self._harvest(components, k * kc, exclude=query_id)
        if candidates.size == 0:
            return []
        distances = signature_distances(self.signatures.components[candidates], components)
        return _to_neighbors(candidates, distances, k)

    def query_knn_by_signature(
        self, query: Union[Signature, np.ndarray], k: int, kc: int
    ) -> List[Neighbor]:
        """Approximate ``k`` nearest neighbors of a signature that need not be indexed."""
        components = self._check_query(query)
        _check_k(k, kc)
        candidates = self._harvest(components, k * kc, exclude=None)
        if candidates.size == 0:
            return []
        distances = signature_distances(self.signatures.components[candidates], components)
        return _to_neighbors(candidates, distances, k)

    def batch_query_knn(
        self, ids: Sequence[int], k: int, kc: int, n_jobs: int = 1
    ) -> List[List[Neighbor]]:
        """:meth:`query_knn` for many ids; results are in the order of ``ids``."""
        ids = [self._check_id(i) for i in ids]
        _check_k(k, kc)

        def _query_range(chunk: range) -> List[List[Neighbor]]:
            return [self.query_knn(ids[i], k, kc) for i in chunk]

        partials = [partial(_query_range, chunk) for chunk in _chunk_ranges(len(ids), 4 * n_jobs)]
        results = []
        for chunk_result in _execute_partials_in_threadpool(partials, n_jobs):
            results.extend(chunk_result)
        return results

    def get_distance(self, a: int, b: int) -> float:
        """Estimated Jaccard distance between two indexed items."""
        a, b = self._check_id(a), self._check_id(b)
        components = self.signatures.components
        return float(signature_distances(components[a], components[b])[0])


def _check_k(k: int, kc: int) -> None:
    if k < 1 or kc < 1:
        raise UsageError(f"k and kc must be positive, got k={k}, kc={kc}")


def build_index(
    signatures: Union[SignatureMatrix, Sequence[Signature]],
    config: Optional[LshForestConfig] = None,
    n_jobs: int = 1,
) -> LshForest:
    """Index signatures in an LSH Forest.

    Args:
        signatures: Signatures sharing ``d`` and mode; the list position is the item id.
        config: Forest configuration; ``config.l`` must divide ``d``.
        n_jobs: Number of threads used to sort the trees.

    Raises:
        ConfigMismatch: ``l`` does not divide ``d``.
        HeterogeneousSignatures: The signatures differ in mode or length.
        EmptyInput: No signatures were given.
    """
    config = config or LshForestConfig()
    if not isinstance(signatures, SignatureMatrix) and len(signatures) == 0:
        raise EmptyInput("Cannot index zero signatures")
    matrix = stack_signatures(signatures)
    if len(matrix) == 0:
        raise EmptyInput("Cannot index zero signatures")
    m = config.chunk_length(matrix.d)

    def _sort_tree(tree: int):
        chunk = matrix.components[:, tree * m : (tree + 1) * m]
        order = np.lexsort(chunk.T[::-1])
        return np.ascontiguousarray(chunk[order].T), order.astype(np.int64)

    trees = _execute_partials_in_threadpool(
        [partial(_sort_tree, tree) for tree in range(config.l)], n_jobs
    )
    forest = LshForest(matrix, config, [keys for keys, _ in trees], [ids for _, ids in trees])
    forest._debug_log(f"indexed {len(matrix)} signatures in {config.l} trees")
    return forest


class LshForestBuilder:
    """Accumulates signatures batch by batch before freezing them into an index."""

    def __init__(self, config: Optional[LshForestConfig] = None):
        self.config = config or LshForestConfig()
        self._batches: List[SignatureMatrix] = []

    def __len__(self) -> int:
        return sum(len(batch) for batch in self._batches)

    def _debug_log(self, message):
        app_log.debug(f"LSH Forest builder: {message}")

    def add(self, signature: Signature) -> int:
        """Append one signature and return its item id."""
        self.batch_add([signature])
        return len(self) - 1

    def batch_add(self, signatures: Union[SignatureMatrix, Sequence[Signature]]) -> range:
        """Append a batch of signatures and return the range of ids they received."""
        batch = stack_signatures(signatures)
        if self._batches:
            first = self._batches[0]
            if batch.mode is not first.mode or batch.d != first.d:
                raise HeterogeneousSignatures(
                    f"Batch ({batch.mode.value}, d={batch.d}) does not match the index "
                    f"({first.mode.value}, d={first.d})"
                )
        else:
            self.config.chunk_length(batch.d)
        start = len(self)
        self._batches.append(batch)
        self._debug_log(f"added batch of {len(batch)} signatures")
        return range(start, start + len(batch))

    def index(self, n_jobs: int = 1) -> LshForest:
        if not self._batches:
            raise EmptyInput("Cannot index zero signatures")
        mode = self._batches[0].mode
        components = np.vstack([batch.components for batch in self._batches])
        return build_index(SignatureMatrix(components, mode), self.config, n_jobs=n_jobs)


def query_candidates(
    forest: LshForest, query: Union[Signature, np.ndarray], budget: int
) -> np.ndarray:
    return forest.query_candidates(query, budget)


def query_knn(forest: LshForest, query_id: int, k: int, kc: int) -> List[Neighbor]:
    return forest.query_knn(query_id, k, kc)

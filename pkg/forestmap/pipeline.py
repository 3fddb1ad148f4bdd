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

"""Composition of the four phases: index, k-NN graph, spanning forest and layout."""

import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ._shared_files.config import get_config
from ._shared_files.logger import app_log
from .datasets import BinarizeRule, binarize_rows
from .evaluation import Metric, PhaseTimings
from .hashing import HashingConfig, HashingMode, SparseBinarySet, WeightedVector, hash_items
from .io import EdgeListInput, InputFormat, parse_input, parse_metadata, write_outputs
from .knng import KnnGraphConfig, WeightedGraph, build_knn_graph, graph_from_edge_list
from .layout import LayoutConfig, LayoutResult, layout
from .lsh_forest import LshForest, LshForestConfig, build_index
from .mst import SpanningForest, kruskal
from .utils import _numba_threads


class PipelineConfig(BaseModel):
    """Everything one ``embed`` run needs.

    Edge-list input skips the hashing, index and k-NN graph settings.
    """

    model_config = ConfigDict(frozen=True)

    input_path: Path
    input_format: InputFormat = InputFormat.SPARSE_BINARY
    metric: Metric = Metric.JACCARD
    binarize: BinarizeRule = BinarizeRule.MEAN
    hashing: HashingConfig = Field(default_factory=HashingConfig)
    lsh: LshForestConfig = Field(default_factory=LshForestConfig)
    knng: KnnGraphConfig = Field(default_factory=KnnGraphConfig)
    layout: LayoutConfig = Field(default_factory=LayoutConfig)
    out_dir: Path = Path("out")
    svg: bool = False
    meta_path: Optional[Path] = None
    color_by: Optional[str] = None
    n_jobs: int = Field(default_factory=lambda: get_config("sdk.n_jobs"))

    @model_validator(mode="after")
    def _check_combination(self) -> "PipelineConfig":
        if self.color_by is not None and self.meta_path is None:
            raise ValueError("color_by needs a metadata file")
        if self.input_format is InputFormat.EDGE_LIST:
            return self
        if self.metric is Metric.EUCLIDEAN:
            raise ValueError("embed supports the jaccard and weighted-jaccard metrics")
        weighted = self.metric is Metric.WEIGHTED_JACCARD
        if weighted and self.input_format is not InputFormat.DENSE_CSV:
            raise ValueError("weighted-jaccard needs dense-csv input")
        self.lsh.chunk_length(self.hashing.d)
        return self


@dataclass(frozen=True, eq=False)
class Embedding:
    """Intermediate and final products of one run."""

    index: Optional[LshForest]
    graph: WeightedGraph
    forest: SpanningForest
    layout: LayoutResult
    timings: PhaseTimings


class _Stopwatch:
    def __init__(self):
        self.seconds: Dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        app_log.debug(f"Phase {name} started")
        start = time.perf_counter()
        yield
        self.seconds[name] = time.perf_counter() - start
        app_log.info(f"Phase {name} took {self.seconds[name]:.3f} s")

    def timings(self) -> PhaseTimings:
        phases = {name: self.seconds.get(name, 0.0) for name in ("index", "knng", "mst", "layout")}
        return PhaseTimings(total=sum(phases.values()), **phases)


def _finish(
    stopwatch: _Stopwatch,
    index: Optional[LshForest],
    graph: WeightedGraph,
    layout_config: LayoutConfig,
    n_jobs: int,
) -> Embedding:
    with stopwatch.phase("mst"):
        forest = kruskal(graph)
    with stopwatch.phase("layout"):
        result = layout(forest, layout_config, n_jobs=n_jobs)
    return Embedding(index, graph, forest, result, stopwatch.timings())


def embed_items(
    items: Sequence[Union[SparseBinarySet, WeightedVector]],
    hashing: HashingConfig,
    lsh: Optional[LshForestConfig] = None,
    knng: Optional[KnnGraphConfig] = None,
    layout_config: Optional[LayoutConfig] = None,
    n_jobs: int = 1,
) -> Embedding:
    """Run all four phases on in-memory items.

    Args:
        items: Binary sets or weighted vectors matching ``hashing.mode``.
        hashing: Hash family.
        lsh: Forest settings.
        knng: ``k`` and ``kc``.
        layout_config: Layout settings.
        n_jobs: Number of threads used by every phase.

    Returns:
        The index, graphs, layout and per-phase wall times.
    """
    stopwatch = _Stopwatch()
    with stopwatch.phase("index"):
        with _numba_threads(n_jobs):
            signatures = hash_items(items, hashing)
        index = build_index(signatures, lsh, n_jobs=n_jobs)
    with stopwatch.phase("knng"):
        graph = build_knn_graph(index, index.n, knng, n_jobs=n_jobs)
    return _finish(stopwatch, index, graph, layout_config or LayoutConfig(), n_jobs)


def embed_edge_list(
    edges: EdgeListInput, layout_config: Optional[LayoutConfig] = None, n_jobs: int = 1
) -> Embedding:
    """Run the spanning forest and layout phases on a supplied graph."""
    stopwatch = _Stopwatch()
    graph = graph_from_edge_list(edges.entries, edges.n)
    return _finish(stopwatch, None, graph, layout_config or LayoutConfig(), n_jobs)


def _hashing_for(config: PipelineConfig, dim: int) -> HashingConfig:
    mode = HashingMode.WEIGHTED if config.metric is Metric.WEIGHTED_JACCARD else HashingMode.BINARY
    return HashingConfig(
        d=config.hashing.d,
        seed=config.hashing.seed,
        mode=mode,
        dim=dim if mode is HashingMode.WEIGHTED else None,
    )


def _items_for(config: PipelineConfig, parsed) -> List[Union[SparseBinarySet, WeightedVector]]:
    if config.input_format is InputFormat.SPARSE_BINARY:
        return parsed
    if config.metric is Metric.WEIGHTED_JACCARD:
        return [WeightedVector(row) for row in parsed]
    return binarize_rows(parsed, config.binarize)


@dataclass(frozen=True, eq=False)
class PipelineResult:
    embedding: Embedding
    outputs: Dict[str, Path]

    @property
    def timings(self) -> PhaseTimings:
        return self.embedding.timings


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Parse the input, run the phases and write the output files.

    Identical configuration and input give byte-identical ``nodes.csv`` and
    ``edges.csv`` whatever ``n_jobs`` is.
    """
    metadata = parse_metadata(config.meta_path) if config.meta_path else None
    if config.color_by is not None:
        metadata.column(config.color_by)
    parsed = parse_input(config.input_path, config.input_format)

    if isinstance(parsed, EdgeListInput):
        embedding = embed_edge_list(parsed, config.layout, config.n_jobs)
    else:
        dim = parsed.shape[1] if isinstance(parsed, np.ndarray) else 0
        embedding = embed_items(
            _items_for(config, parsed),
            _hashing_for(config, dim),
            config.lsh,
            config.knng,
            config.layout,
            config.n_jobs,
        )

    outputs = write_outputs(
        embedding.layout,
        config.out_dir,
        metadata=metadata,
        color_by=config.color_by,
        svg=config.svg,
    )
    app_log.info(f"Embedding finished: {embedding.timings.as_line(embedding.layout.n)}")
    return PipelineResult(embedding=embedding, outputs=outputs)

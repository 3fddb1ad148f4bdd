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

"""Scaling benchmark and parameter sweeps over the full pipeline."""

from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Union

import numpy as np

from ._shared_files.logger import app_log
from .datasets import SyntheticSetSpec, synthetic_binary_sets
from .errors import UsageError
from .evaluation import (
    Metric,
    NnTable,
    PhaseTimings,
    euclidean_ranks,
    topological_ranks,
    true_nearest_neighbors,
)
from .hashing import HashingConfig, HashingMode, SparseBinarySet, WeightedVector
from .knng import KnnGraphConfig
from .layout import LayoutConfig
from .lsh_forest import LshForestConfig
from .pipeline import embed_items

SWEEP_PARAMETERS = {"d": "hashing", "l": "lsh", "k": "knng", "kc": "knng", "p": "layout"}


@dataclass(frozen=True)
class BenchReport:
    sizes: List[int]
    timings: List[PhaseTimings]
    slope: float

    def lines(self) -> List[str]:
        rows = [t.as_line(n) for n, t in zip(self.sizes, self.timings)]
        return rows + [f"slope={self.slope:.3f}"]


@dataclass(frozen=True)
class SweepPoint:
    value: Any
    topological: float
    euclidean: float


def fit_loglog_slope(sizes: Sequence[int], seconds: Sequence[float]) -> float:
    """Least-squares slope of ``log(seconds)`` against ``log(sizes)``."""
    if len(sizes) != len(seconds) or len(sizes) < 2:
        raise UsageError("A slope needs at least two (size, time) pairs")
    slope, _ = np.polyfit(np.log(sizes), np.log(np.maximum(seconds, 1e-9)), 1)
    return float(slope)


def bench_pipeline(
    sizes: Sequence[int],
    spec: Optional[SyntheticSetSpec] = None,
    hashing: Optional[HashingConfig] = None,
    lsh: Optional[LshForestConfig] = None,
    knng: Optional[KnnGraphConfig] = None,
    layout_config: Optional[LayoutConfig] = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> BenchReport:
    """Time the pipeline on seeded synthetic binary sets of growing size.

    Args:
        sizes: Ascending item counts, at least two.
        spec: Generator of the synthetic sets.
        hashing: Binary-mode hash family.
        lsh: Forest settings.
        knng: ``k`` and ``kc``.
        layout_config: Layout settings.
        seed: Seed of the synthetic data.
        n_jobs: Number of threads.

    Returns:
        Per-size timings and the fitted log-log slope of the total time.
    """
    sizes = [int(n) for n in sizes]
    if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise UsageError(f"Benchmark sizes must be ascending with at least two entries: {sizes}")

    spec = spec or SyntheticSetSpec()
    hashing = hashing or HashingConfig()
    timings = []
    for n in sizes:
        items = synthetic_binary_sets(spec, n, seed)
        embedding = embed_items(items, hashing, lsh, knng, layout_config, n_jobs)
        timings.append(embedding.timings)
        app_log.info(f"Benchmark {embedding.timings.as_line(n)}")

    slope = fit_loglog_slope(sizes, [t.total for t in timings])
    return BenchReport(sizes=sizes, timings=timings, slope=slope)


def _with_value(config, name: str, value):
    return type(config)(**{**config.model_dump(), name: value})


def parameter_sweep(
    items: Sequence[Union[SparseBinarySet, WeightedVector]],
    name: str,
    values: Sequence[Any],
    hashing: HashingConfig,
    lsh: Optional[LshForestConfig] = None,
    knng: Optional[KnnGraphConfig] = None,
    layout_config: Optional[LayoutConfig] = None,
    nn_table: Optional[NnTable] = None,
    n_jobs: int = 1,
) -> List[SweepPoint]:
    """1-NN preservation rates while one of ``d``, ``l``, ``k``, ``kc`` or ``p`` varies.

    The true nearest neighbors are computed once, under the Jaccard metric that
    matches ``hashing.mode``, unless ``nn_table`` is given.
    """
    if name not in SWEEP_PARAMETERS:
        raise UsageError(f"Cannot sweep {name!r}; choose one of {sorted(SWEEP_PARAMETERS)}")

    configs = {
        "hashing": hashing,
        "lsh": lsh or LshForestConfig(),
        "knng": knng or KnnGraphConfig(),
        "layout": layout_config or LayoutConfig(),
    }
    if nn_table is None:
        metric = Metric.JACCARD if hashing.mode is HashingMode.BINARY else Metric.WEIGHTED_JACCARD
        nn_table = true_nearest_neighbors(items, metric, n_jobs=n_jobs)

    points = []
    for value in values:
        swept = dict(configs)
        swept[SWEEP_PARAMETERS[name]] = _with_value(configs[SWEEP_PARAMETERS[name]], name, value)
        embedding = embed_items(
            items, swept["hashing"], swept["lsh"], swept["knng"], swept["layout"], n_jobs
        )
        point = SweepPoint(
            value=value,
            topological=topological_ranks(embedding.forest, nn_table, n_jobs).preservation_rate,
            euclidean=euclidean_ranks(embedding.layout.coords, nn_table, n_jobs).preservation_rate,
        )
        app_log.info(
            f"Sweep {name}={value}: topological={point.topological:.3f} "
            f"euclidean={point.euclidean:.3f}"
        )
        points.append(point)
    return points

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

"""Tree embeddings of large high-dimensional data sets.

Items are encoded with (weighted) MinHash, indexed in an LSH Forest, connected
into an approximate k-nearest-neighbor graph, reduced to a minimum spanning
forest and drawn with a multilevel force-directed layout.
"""

from .errors import BackendFailure, DataError, ForestmapError, UsageError
from .evaluation import (
    Metric,
    NnTable,
    PhaseTimings,
    RankReport,
    euclidean_ranks,
    topological_ranks,
    true_nearest_neighbors,
)
from .hashing import (
    HashingConfig,
    HashingMode,
    Signature,
    SignatureMatrix,
    SparseBinarySet,
    WeightedVector,
    estimate_jaccard,
    exact_jaccard,
    exact_weighted_jaccard,
    hash_items,
    minhash_signature,
    weighted_minhash_signature,
)
from .knng import KnnGraphConfig, WeightedGraph, build_knn_graph, exact_knn_backend
from .layout import LayoutConfig, LayoutResult
from .lsh_forest import LshForest, LshForestConfig, Neighbor, build_index
from .mst import SpanningForest, components, kruskal
from .pipeline import PipelineConfig, embed_items, run_pipeline

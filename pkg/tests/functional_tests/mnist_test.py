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

import numpy as np
import pytest
from sklearn.datasets import fetch_openml

from forestmap.datasets import binarize_rows
from forestmap.evaluation import euclidean_ranks, topological_ranks, true_nearest_neighbors
from forestmap.hashing import HashingConfig, minhash_signatures
from forestmap.knng import exact_knn_backend
from forestmap.layout import LayoutConfig, layout
from forestmap.lsh_forest import LshForestConfig, build_index
from forestmap.pipeline import embed_items

# Binarized MNIST


@pytest.fixture(scope="module")
def mnist_sets():
    images = fetch_openml("mnist_784", version=1, as_frame=False).data
    return binarize_rows(images[:10_000], "mean")


@pytest.fixture(scope="module")
def mnist_embedding(mnist_sets):
    return embed_items(mnist_sets, HashingConfig(), LshForestConfig(), n_jobs=4)


@pytest.mark.functional_tests
def test_mnist_recall(mnist_sets):
    signatures = minhash_signatures(mnist_sets[:5000], HashingConfig())
    forest = build_index(signatures, LshForestConfig(), n_jobs=4)
    exact = exact_knn_backend(signatures)

    kth = [exact.query_knn(i, 10)[-1].distance for i in range(forest.n)]
    recalls = []
    for kc in (1, 2, 4, 10):
        hits = 0
        for i in range(forest.n):
            hits += sum(neighbor.distance <= kth[i] for neighbor in forest.query_knn(i, 10, kc))
        recalls.append(hits / (10 * forest.n))

    print(recalls)

    assert recalls[-1] >= 0.7
    assert recalls == sorted(recalls)


@pytest.mark.functional_tests
def test_mnist_preservation(mnist_sets, mnist_embedding):
    nn_table = true_nearest_neighbors(mnist_sets, "jaccard")
    topological = topological_ranks(mnist_embedding.forest, nn_table, n_jobs=4)
    euclidean = euclidean_ranks(mnist_embedding.layout.coords, nn_table, n_jobs=4)

    print(topological.preservation_rate, euclidean.preservation_rate)

    assert topological.preservation_rate >= 0.60
    assert euclidean.preservation_rate >= 0.25


@pytest.mark.functional_tests
def test_mnist_layout_structure(mnist_embedding):
    result = mnist_embedding.layout
    adjacent = np.linalg.norm(result.coords[result.u] - result.coords[result.v], axis=1)

    rng = np.random.default_rng(0)
    a, b = rng.integers(result.n, size=(2, 12_000))
    tree_pairs = set(zip(result.u.tolist(), result.v.tolist()))
    random_pairs = np.array(
        [
            (x, y)
            for x, y in zip(a.tolist(), b.tolist())
            if x != y and (min(x, y), max(x, y)) not in tree_pairs
        ][:10_000]
    )
    spread = np.linalg.norm(
        result.coords[random_pairs[:, 0]] - result.coords[random_pairs[:, 1]], axis=1
    )
    assert adjacent.mean() <= 0.5 * spread.mean()

    lengths = []
    for p in (0.5, 1.0, 2.0):
        coords = layout(mnist_embedding.forest, LayoutConfig(p=p), n_jobs=4).coords
        lengths.append(np.linalg.norm(coords[result.u] - coords[result.v], axis=1).mean())
    assert lengths[0] < lengths[1] < lengths[2]

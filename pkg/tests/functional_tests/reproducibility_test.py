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

import pytest

from forestmap.cli import EXIT_OK, cli_entry
from forestmap.datasets import SyntheticSetSpec, synthetic_binary_sets
from forestmap.io import EDGES_FILE, NODES_FILE

# Reproducibility


@pytest.mark.functional_tests
def test_embed_reproducible(tmp_path):
    sets = synthetic_binary_sets(SyntheticSetSpec(), 5000, seed=11)
    source = tmp_path / "sets.txt"
    source.write_text("".join(" ".join(map(str, s.elements.tolist())) + "\n" for s in sets))

    outputs = []
    for run, jobs in enumerate(("1", "1", "4")):
        out_dir = tmp_path / f"run{run}"
        args = ["--jobs", jobs, "embed", "--input", str(source), "--out-dir", str(out_dir)]
        assert cli_entry(args) == EXIT_OK
        outputs.append(((out_dir / NODES_FILE).read_bytes(), (out_dir / EDGES_FILE).read_bytes()))

    assert outputs[0] == outputs[1] == outputs[2]

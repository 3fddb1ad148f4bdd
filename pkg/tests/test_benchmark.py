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

"""Unit tests for the scaling benchmark and parameter sweeps."""

import numpy as np
import pytest

from forestmap.benchmark import bench_pipeline, fit_loglog_slope, parameter_sweep
from forestmap.datasets import SyntheticSetSpec, synthetic_binary_sets
from forestmap.errors import UsageError
from forestmap.evaluation import PhaseTimings
from forestmap.hashing import HashingConfig
from forestmap.layout import LayoutConfig
from forestmap.lsh_forest import LshForestConfig

MOCK_SPEC = SyntheticSetSpec(set_size=16, universe=1000, n_prototypes=10)
MOCK_HASHING = HashingConfig(d=64)
MOCK_LSH = LshForestConfig(l=8)
MOCK_LAYOUT = LayoutConfig(iterations_per_level=20)


def test_fit_loglog_slope():
    """Test the slope of exact power laws."""
    sizes = [100, 200, 400, 800]
    assert fit_loglog_slope(sizes, [n**0.9 for n in sizes]) == pytest.approx(0.9)
    assert fit_loglog_slope(sizes, [3.0 * n for n in sizes]) == pytest.approx(1.0)


def test_fit_loglog_slope_needs_two_points():
    """Test that a single measurement has no slope."""
    with pytest.raises(UsageError):
        fit_loglog_slope([100], [1.0])


class TestBenchPipeline:
    def test_two_sizes(self, mocker):
        """Test that every size is timed and logged."""
        mock_log = mocker.patch("forestmap.benchmark.app_log.info")
        report = bench_pipeline(
            [40, 80], MOCK_SPEC, MOCK_HASHING, MOCK_LSH, layout_config=MOCK_LAYOUT
        )
        assert report.sizes == [40, 80]
        assert len(report.timings) == 2
        for t in report.timings:
            assert min(t.index, t.knng, t.mst, t.layout) > 0
        assert np.isfinite(report.slope)
        messages = [call.args[0] for call in mock_log.call_args_list]
        assert len([m for m in messages if m.startswith("Benchmark n=")]) == 2

        lines = report.lines()
        assert lines[0].startswith("n=40 index=")
        assert lines[-1].startswith("slope=")

    @pytest.mark.parametrize("sizes", [[100], [200, 100], [100, 100]])
    def test_invalid_sizes(self, sizes):
        """Test that sizes must ascend with at least two entries."""
        with pytest.raises(UsageError):
            bench_pipeline(sizes)

    def test_report_lines(self, mocker):
        """Test the report lines built from mocked pipeline timings."""
        timings = [PhaseTimings(1.0, 2.0, 0.5, 4.0, 7.5), PhaseTimings(2.0, 4.0, 1.0, 8.0, 15.0)]
        mock_embed = mocker.patch("forestmap.benchmark.embed_items")
        mock_embed.side_effect = [mocker.Mock(timings=t) for t in timings]

        report = bench_pipeline([10, 20], MOCK_SPEC, MOCK_HASHING)
        assert report.slope == pytest.approx(1.0)
        assert report.lines() == [
            "n=10 index=1.000 knng=2.000 mst=0.500 layout=4.000 total=7.500",
            "n=20 index=2.000 knng=4.000 mst=1.000 layout=8.000 total=15.000",
            "slope=1.000",
        ]


class TestParameterSweep:
    @pytest.fixture(scope="class")
    def mock_items(self):
        return synthetic_binary_sets(MOCK_SPEC, 60, seed=3)

    def test_sweep_k(self, mock_items):
        """Test that each value yields preservation rates in [0, 1]."""
        points = parameter_sweep(
            mock_items, "k", [2, 5], MOCK_HASHING, MOCK_LSH, layout_config=MOCK_LAYOUT
        )
        assert [point.value for point in points] == [2, 5]
        for point in points:
            assert 0.0 <= point.topological <= 1.0
            assert 0.0 <= point.euclidean <= 1.0

    def test_sweep_d(self, mock_items):
        """Test that sweeping d rebuilds the hash family."""
        points = parameter_sweep(
            mock_items, "d", [32, 64], MOCK_HASHING, MOCK_LSH, layout_config=MOCK_LAYOUT
        )
        assert len(points) == 2

    def test_unknown_parameter(self, mock_items):
        """Test that only the model parameters can be swept."""
        with pytest.raises(UsageError):
            parameter_sweep(mock_items, "theta", [1.0], MOCK_HASHING)

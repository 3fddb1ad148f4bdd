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

"""Unit tests for the command line interface."""

import os

import pytest

from forestmap.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, cli_entry, main
from forestmap.io import EDGES_FILE, NODES_FILE, PLOT_FILE

MOCK_FAST = ["--iterations", "20", "--d", "64"]


@pytest.fixture
def mock_input(tmp_path):
    path = tmp_path / "sets.txt"
    path.write_text("1 2 3\n2 3 4\n3 4 5\n10 11\n10 11 12\n")
    return path


class TestCli:
    def test_missing_input(self, capsys):
        """Test that embed without --input is a usage error with a synopsis."""
        assert cli_entry(["embed"]) == EXIT_USAGE
        err = capsys.readouterr().err
        assert "--input" in err
        assert "usage: forestmap" in err

    def test_missing_command(self, capsys):
        """Test that a subcommand is required."""
        assert cli_entry([]) == EXIT_USAGE
        assert "usage:" in capsys.readouterr().err

    def test_l_must_divide_d(self, mock_input, capsys):
        """Test that a tree count not dividing d is a usage error."""
        status = cli_entry(["embed", "--input", str(mock_input), "--d", "512", "--l", "7"])
        assert status == EXIT_USAGE
        assert "l must divide d" in capsys.readouterr().err

    def test_invalid_value(self, mock_input, capsys):
        """Test that an out-of-range parameter is a usage error."""
        assert cli_entry(["embed", "--input", str(mock_input), "--p", "0"]) == EXIT_USAGE
        assert "p" in capsys.readouterr().err

    def test_unknown_log_level(self, mock_input, capsys):
        """Test that an unknown log level is a usage error with a synopsis."""
        status = cli_entry(["--log-level", "loud", "embed", "--input", str(mock_input)])
        assert status == EXIT_USAGE
        err = capsys.readouterr().err
        assert "--log-level" in err
        assert "usage: forestmap" in err

    def test_malformed_environment(self, mock_input, mocker, capsys):
        """Test that an unreadable FORESTMAP_* value is a usage error naming the variable."""
        mocker.patch.dict(os.environ, {"FORESTMAP_HASHING_D": "abc"})
        assert cli_entry(["embed", "--input", str(mock_input)]) == EXIT_USAGE
        assert "FORESTMAP_HASHING_D='abc'" in capsys.readouterr().err

    def test_unknown_color_column(self, tmp_path, mock_input, capsys):
        """Test that an unknown color column fails before the outputs are touched."""
        out_dir = tmp_path / "out"
        out_dir.mkdir()
        (out_dir / PLOT_FILE).write_text("previous")
        meta = tmp_path / "meta.csv"
        meta.write_text("label\n" + "a\n" * 5)
        args = ["--input", str(mock_input), "--out-dir", str(out_dir), "--svg"] + MOCK_FAST
        args += ["--meta", str(meta), "--color-by", "nope"]

        assert cli_entry(["embed"] + args) == EXIT_USAGE
        assert "nope" in capsys.readouterr().err
        assert [p.name for p in out_dir.iterdir()] == [PLOT_FILE]
        assert (out_dir / PLOT_FILE).read_text() == "previous"

    def test_embed(self, tmp_path, mock_input, capsys):
        """Test that a valid embed writes three files and prints the timings."""
        out_dir = tmp_path / "out"
        args = ["--input", str(mock_input), "--out-dir", str(out_dir), "--svg"] + MOCK_FAST
        assert cli_entry(["--jobs", "2", "embed"] + args) == EXIT_OK

        assert sorted(p.name for p in out_dir.iterdir()) == sorted(
            [NODES_FILE, EDGES_FILE, PLOT_FILE]
        )
        assert capsys.readouterr().out.startswith("n=5 index=")

    def test_eval(self, tmp_path, mock_input, capsys):
        """Test that eval writes both rank histograms after an embed."""
        args = ["--input", str(mock_input), "--out-dir", str(tmp_path)] + MOCK_FAST
        assert cli_entry(["embed"] + args) == EXIT_OK
        capsys.readouterr()

        assert cli_entry(["eval"] + args) == EXIT_OK
        out = capsys.readouterr().out
        assert "topological_preservation=" in out
        assert "euclidean_preservation=" in out
        assert (tmp_path / "topological_ranks.csv").read_text().startswith("rank,count\n1,")
        assert (tmp_path / "euclidean_ranks.csv").exists()

    def test_eval_without_layout(self, tmp_path, mock_input):
        """Test that eval before embed fails with a data error."""
        args = ["eval", "--input", str(mock_input), "--out-dir", str(tmp_path / "none")]
        assert cli_entry(args) == EXIT_DATA

    def test_data_error(self, tmp_path, capsys):
        """Test that a malformed input exits with status 2 naming the line."""
        source = tmp_path / "bad.txt"
        source.write_text("1 2\n7 3 11\n")
        args = ["embed", "--input", str(source), "--out-dir", str(tmp_path)]
        assert cli_entry(args) == EXIT_DATA
        assert ":2:" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        """Test that an unreadable input is a data error."""
        assert cli_entry(["embed", "--input", str(tmp_path / "missing.txt")]) == EXIT_DATA

    def test_bench(self, capsys):
        """Test the benchmark output lines."""
        status = cli_entry(["bench", "--sizes", "20,40"] + MOCK_FAST)
        assert status == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("n=20 ")
        assert lines[1].startswith("n=40 ")
        assert lines[2].startswith("slope=")

    def test_bench_invalid_sizes(self, capsys):
        """Test that non-ascending sizes are a usage error."""
        assert cli_entry(["bench", "--sizes", "40,20"]) == EXIT_USAGE
        assert cli_entry(["bench", "--sizes", "a,b"]) == EXIT_USAGE

    def test_main(self, mocker):
        """Test that main loads the environment and exits with the command status."""
        mock_load = mocker.patch("forestmap.cli.load_environment")
        mocker.patch("forestmap.cli.cli_entry", return_value=EXIT_DATA)
        with pytest.raises(SystemExit) as excinfo:
            main()
        assert excinfo.value.code == EXIT_DATA
        mock_load.assert_called_once_with()

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

"""Command line interface: ``forestmap embed | eval | bench``."""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from ._shared_files.config import get_config, load_environment
from ._shared_files.logger import LOG_LEVELS, set_log_level
from .benchmark import bench_pipeline
from .datasets import BinarizeRule, binarize_rows
from .errors import ForestmapError, UsageError
from .evaluation import (
    Metric,
    euclidean_ranks,
    rank_histogram_csv,
    topological_ranks,
    true_nearest_neighbors,
)
from .hashing import HashingConfig, WeightedVector
from .io import InputFormat, parse_input, read_layout
from .knng import KnnGraphConfig
from .layout import LayoutConfig
from .lsh_forest import LshForestConfig
from .mst import SpanningForest
from .pipeline import PipelineConfig, run_pipeline
from .utils import _write_atomically

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so that usage errors map to one exit status."""

    def error(self, message: str):
        raise _ArgumentError(message)


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", type=Path, required=True, help="input file")
    parser.add_argument(
        "--input-format",
        choices=[f.value for f in InputFormat],
        default=InputFormat.SPARSE_BINARY.value,
    )
    parser.add_argument(
        "--metric", choices=[m.value for m in Metric], default=Metric.JACCARD.value
    )
    parser.add_argument(
        "--binarize",
        choices=[r.value for r in BinarizeRule],
        default=BinarizeRule.MEAN.value,
        help="rule turning dense rows into sets for the jaccard metric",
    )
    parser.add_argument("--d", type=int, default=get_config("hashing.d"))
    parser.add_argument("--l", type=int, default=get_config("lsh.l"))
    parser.add_argument("--k", type=int, default=get_config("knng.k"))
    parser.add_argument("--kc", type=int, default=get_config("knng.kc"))
    parser.add_argument("--p", type=float, default=get_config("layout.p"))
    parser.add_argument(
        "--iterations", type=int, default=get_config("layout.iterations_per_level")
    )
    parser.add_argument("--theta", type=float, default=get_config("layout.theta"))
    parser.add_argument("--seed", type=int, default=get_config("hashing.seed"))
    parser.add_argument("--out-dir", type=Path, default=Path("out"))


def _build_parser() -> _Parser:
    parser = _Parser(prog="forestmap", description="Tree embeddings of large data sets.")
    parser.add_argument("--jobs", type=int, default=get_config("sdk.n_jobs"))
    parser.add_argument("--log-level", choices=LOG_LEVELS, type=str.lower, default=None)
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)
    commands.required = True

    embed = commands.add_parser("embed", help="run the full pipeline")
    _add_model_flags(embed)
    embed.add_argument("--svg", action="store_true", help="also draw plot.svg")
    embed.add_argument("--meta", type=Path, default=None, help="metadata CSV")
    embed.add_argument("--color-by", default=None, help="metadata column coloring the plot")

    evaluate = commands.add_parser("eval", help="rank reports of a produced layout")
    _add_model_flags(evaluate)

    bench = commands.add_parser("bench", help="scaling study on synthetic sets")
    bench.add_argument(
        "--sizes", required=True, help="comma-separated ascending item counts"
    )
    for flag, key, kind in (
        ("--d", "hashing.d", int),
        ("--l", "lsh.l", int),
        ("--k", "knng.k", int),
        ("--kc", "knng.kc", int),
        ("--p", "layout.p", float),
        ("--iterations", "layout.iterations_per_level", int),
        ("--theta", "layout.theta", float),
        ("--seed", "hashing.seed", int),
    ):
        bench.add_argument(flag, type=kind, default=get_config(key))
    return parser


def _model_configs(args: argparse.Namespace):
    lsh = LshForestConfig(l=args.l)
    hashing = HashingConfig(d=args.d, seed=args.seed)
    lsh.chunk_length(hashing.d)
    knng = KnnGraphConfig(k=args.k, kc=args.kc)
    layout_config = LayoutConfig(
        p=args.p, iterations_per_level=args.iterations, theta=args.theta, seed=args.seed
    )
    return hashing, lsh, knng, layout_config


def _embed(args: argparse.Namespace) -> None:
    hashing, lsh, knng, layout_config = _model_configs(args)
    config = PipelineConfig(
        input_path=args.input,
        input_format=args.input_format,
        metric=args.metric,
        binarize=args.binarize,
        hashing=hashing,
        lsh=lsh,
        knng=knng,
        layout=layout_config,
        out_dir=args.out_dir,
        svg=args.svg,
        meta_path=args.meta,
        color_by=args.color_by,
        n_jobs=args.jobs,
    )
    result = run_pipeline(config)
    print(result.timings.as_line(result.embedding.layout.n))


def _evaluation_items(args: argparse.Namespace):
    parsed = parse_input(args.input, args.input_format)
    input_format = InputFormat(args.input_format)
    metric = Metric(args.metric)
    if input_format is InputFormat.EDGE_LIST:
        raise UsageError("eval needs the original items, not an edge list")
    if input_format is InputFormat.SPARSE_BINARY or metric is Metric.EUCLIDEAN:
        return parsed
    if metric is Metric.WEIGHTED_JACCARD:
        return [WeightedVector(row) for row in parsed]
    return binarize_rows(parsed, args.binarize)


def _eval(args: argparse.Namespace) -> None:
    items = _evaluation_items(args)
    table = read_layout(args.out_dir)
    forest = SpanningForest(n=table.n, u=table.u, v=table.v, w=table.w, component=table.component)

    nn_table = true_nearest_neighbors(items, args.metric, n_jobs=args.jobs)
    reports = {
        "topological": topological_ranks(forest, nn_table, n_jobs=args.jobs),
        "euclidean": euclidean_ranks(table.coords, nn_table, n_jobs=args.jobs),
    }
    for name, report in reports.items():
        text = rank_histogram_csv(report)
        _write_atomically(args.out_dir / f"{name}_ranks.csv", lambda handle: handle.write(text))
        print(
            f"{name}_preservation={report.preservation_rate:.4f} "
            f"{name}_mean_rank={float(report.ranks.mean()):.3f}"
        )


def _parse_sizes(text: str) -> List[int]:
    try:
        return [int(size) for size in text.split(",") if size.strip()]
    except ValueError:
        raise UsageError(f"--sizes must be comma-separated integers, got {text!r}") from None


def _bench(args: argparse.Namespace) -> None:
    hashing, lsh, knng, layout_config = _model_configs(args)
    report = bench_pipeline(
        _parse_sizes(args.sizes),
        hashing=hashing,
        lsh=lsh,
        knng=knng,
        layout_config=layout_config,
        seed=args.seed,
        n_jobs=args.jobs,
    )
    for line in report.lines():
        print(line)


COMMANDS = {"embed": _embed, "eval": _eval, "bench": _bench}


def _one_line(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"])
    return f"{location}: {first['msg']}" if location else first["msg"]


def cli_entry(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit status: 0 ok, 1 usage error, 2 data error."""
    try:
        parser = _build_parser()
    except UsageError as e:
        print(f"forestmap: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        args = parser.parse_args(argv)
    except _ArgumentError as e:
        print(f"forestmap: error: {e}", file=sys.stderr)
        print(parser.format_usage().rstrip(), file=sys.stderr)
        return EXIT_USAGE

    if args.log_level:
        set_log_level(args.log_level)

    try:
        COMMANDS[args.command](args)
    except (UsageError, ValidationError) as e:
        reason = _one_line(e) if isinstance(e, ValidationError) else str(e)
        print(f"forestmap: error: {reason}", file=sys.stderr)
        print(parser.format_usage().rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except (ForestmapError, OSError) as e:
        print(f"forestmap: error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    load_environment()
    sys.exit(cli_entry())

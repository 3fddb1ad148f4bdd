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

"""Input parsing and output files of the pipeline."""

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from ._shared_files.logger import app_log
from .errors import (
    DimensionMismatch,
    EmptyInput,
    MetadataLengthMismatch,
    ParseError,
    UsageError,
)
from .hashing import MAX_ELEMENT, SparseBinarySet
from .knng import WeightedGraph, degrees
from .layout import LayoutResult
from .utils import _write_atomically

NODES_FILE = "nodes.csv"
EDGES_FILE = "edges.csv"
PLOT_FILE = "plot.svg"

CANVAS_SIZE = 1600
CANVAS_MARGIN = 40
NODE_RADIUS = 2
STROKE_WIDTH = 0.5
DEFAULT_COLOR = "#1f77b4"
EDGE_COLOR = "#999999"
PALETTE = [
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
    "#aec7e8",
    "#ffbb78",
]
GRADIENT = ((0x44, 0x01, 0x54), (0xFD, 0xE7, 0x25))


class InputFormat(str, Enum):
    SPARSE_BINARY = "sparse-binary"
    DENSE_CSV = "dense-csv"
    EDGE_LIST = "edge-list"


@dataclass(frozen=True)
class EdgeListInput:
    """Parsed ``u v [w]`` entries; ``n`` is one more than the largest node id."""

    entries: List[Tuple[int, int, float]]
    n: int


@dataclass(frozen=True)
class Metadata:
    header: List[str]
    rows: List[List[str]]

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> List[str]:
        try:
            index = self.header.index(name)
        except ValueError as e:
            raise UsageError(f"Metadata has no column {name!r}") from e
        return [row[index] for row in self.rows]


@dataclass(frozen=True, eq=False)
class LayoutTable:
    """A layout read back from ``nodes.csv`` and ``edges.csv``."""

    coords: np.ndarray
    degree: np.ndarray
    component: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])


def _data_lines(handle: TextIO) -> Iterator[Tuple[int, str]]:
    for number, line in enumerate(handle, start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield number, stripped


def _parse_sparse_binary(handle: TextIO, path: str) -> List[SparseBinarySet]:
    items = []
    for number, line in _data_lines(handle):
        try:
            values = [int(token) for token in line.split()]
        except ValueError:
            raise ParseError(number, "elements must be unsigned integers", path) from None
        if min(values) < 0 or max(values) > MAX_ELEMENT:
            raise ParseError(number, "elements must be 32-bit unsigned integers", path)
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ParseError(number, "elements must be strictly ascending", path)
        items.append(SparseBinarySet(np.asarray(values, dtype=np.int64)))
    return items


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def _parse_dense_csv(handle: TextIO, path: str) -> np.ndarray:
    rows: List[List[float]] = []
    width: Optional[int] = None
    for number, fields in enumerate(csv.reader(handle), start=1):
        if not fields or all(not field.strip() for field in fields):
            continue
        if number == 1 and not _is_number(fields[0].strip()):
            continue
        try:
            row = [float(field) for field in fields]
        except ValueError:
            raise ParseError(number, "values must be real numbers", path) from None
        if not all(math.isfinite(value) and value >= 0 for value in row):
            raise ParseError(number, "values must be finite and non-negative", path)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DimensionMismatch(width, len(row), line=number)
        rows.append(row)
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), width or 0)


def _parse_edge_list(handle: TextIO, path: str) -> EdgeListInput:
    entries = []
    n = 0
    for number, line in _data_lines(handle):
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise ParseError(number, "expected 'u v [w]'", path)
        try:
            u, v = int(tokens[0]), int(tokens[1])
            w = float(tokens[2]) if len(tokens) == 3 else 1.0
        except ValueError:
            reason = "node ids must be integers and weights numbers"
            raise ParseError(number, reason, path) from None
        if u < 0 or v < 0:
            raise ParseError(number, "node ids must be non-negative", path)
        entries.append((u, v, w))
        n = max(n, u + 1, v + 1)
    return EdgeListInput(entries=entries, n=n)


def parse_input(
    path: Union[str, Path], input_format: Union[InputFormat, str]
) -> Union[List[SparseBinarySet], np.ndarray, EdgeListInput]:
    """Read an input file.

    Args:
        path: File to read.
        input_format: ``sparse-binary``, ``dense-csv`` or ``edge-list``.

    Returns:
        A list of sets, an ``(n, dim)`` array, or the edge entries.

    Raises:
        ParseError: A line violates the format, with its 1-based line number.
        DimensionMismatch: Dense rows of different widths.
        EmptyInput: The file holds no items.
    """
    input_format = InputFormat(input_format)
    parsers = {
        InputFormat.SPARSE_BINARY: _parse_sparse_binary,
        InputFormat.DENSE_CSV: _parse_dense_csv,
        InputFormat.EDGE_LIST: _parse_edge_list,
    }
    with open(path, newline="", encoding="utf-8") as handle:
        parsed = parsers[input_format](handle, str(path))

    count = len(parsed.entries) if isinstance(parsed, EdgeListInput) else len(parsed)
    if count == 0:
        raise EmptyInput(f"{path} contains no {input_format.value} data")
    app_log.debug(f"Parsed {count} {input_format.value} entries from {path}")
    return parsed


def parse_metadata(path: Union[str, Path]) -> Metadata:
    """Read a metadata CSV with a header row; row ``i`` describes item ``i``."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInput(f"{path} has no header row") from None
        rows = []
        for number, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(number, f"expected {len(header)} fields", str(path))
            rows.append(row)
    return Metadata(header=header, rows=rows)


def _fmt(value: float) -> str:
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


def _gradient_values(values: Sequence[str]) -> Optional[np.ndarray]:
    """Values of a column as floats, or None unless every value is a finite number."""
    if not values or not all(_is_number(value) for value in values):
        return None
    numbers = np.asarray([float(value) for value in values])
    return numbers if np.isfinite(numbers).all() else None


def _node_colors(values: Sequence[str]) -> List[str]:
    numbers = _gradient_values(values)
    if numbers is not None:
        low, high = numbers.min(), numbers.max()
        shares = (numbers - low) / (high - low) if high > low else np.zeros_like(numbers)
        start, stop = np.asarray(GRADIENT[0]), np.asarray(GRADIENT[1])
        return [
            "#%02x%02x%02x" % tuple(np.rint(start + share * (stop - start)).astype(int))
            for share in shares
        ]

    categories: Dict[str, int] = {}
    for value in values:
        categories.setdefault(value, len(categories))
    return [PALETTE[categories[value] % len(PALETTE)] for value in values]


def _to_canvas(coords: np.ndarray) -> np.ndarray:
    if coords.shape[0] == 0:
        return coords
    low, high = coords.min(axis=0), coords.max(axis=0)
    span = float(np.max(high - low)) or 1.0
    scale = (CANVAS_SIZE - 2 * CANVAS_MARGIN) / span
    center = 0.5 * (low + high)
    canvas = (coords - center) * scale + CANVAS_SIZE / 2
    canvas[:, 1] = CANVAS_SIZE - canvas[:, 1]
    return canvas


def _write_svg(handle: TextIO, result: LayoutResult, colors: Sequence[str]) -> None:
    canvas = _to_canvas(result.coords)
    handle.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_SIZE}" '
        f'height="{CANVAS_SIZE}" viewBox="0 0 {CANVAS_SIZE} {CANVAS_SIZE}">\n'
    )
    handle.write(f'<rect width="{CANVAS_SIZE}" height="{CANVAS_SIZE}" fill="#ffffff"/>\n')
    for a, b in zip(result.u.tolist(), result.v.tolist()):
        (x1, y1), (x2, y2) = canvas[a], canvas[b]
        handle.write(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{EDGE_COLOR}" stroke-width="{STROKE_WIDTH}"/>\n'
        )
    for (x, y), color in zip(canvas, colors):
        handle.write(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{NODE_RADIUS}" fill="{color}"/>\n')
    handle.write("</svg>\n")


def write_outputs(
    result: LayoutResult,
    out_dir: Union[str, Path],
    metadata: Optional[Metadata] = None,
    color_by: Optional[str] = None,
    svg: bool = False,
) -> Dict[str, Path]:
    """Write ``nodes.csv``, ``edges.csv`` and optionally ``plot.svg``.

    Every file is written to a temporary name and renamed into place.

    Args:
        result: The layout to export.
        out_dir: Output directory, created if missing.
        metadata: Extra per-node columns appended to ``nodes.csv``.
        color_by: Metadata column that colors the plot.
        svg: Whether to draw ``plot.svg``.

    Returns:
        Paths of the written files by file name.

    Raises:
        MetadataLengthMismatch: The metadata does not have one row per node.
        UsageError: ``color_by`` is given without metadata or names no column.
        OutputUnwritable: A file could not be written.
    """
    out_dir = Path(out_dir)
    if metadata is not None and len(metadata) != result.n:
        raise MetadataLengthMismatch(
            f"Metadata has {len(metadata)} rows but the layout has {result.n} nodes"
        )
    if color_by is not None and metadata is None:
        raise UsageError("--color-by needs metadata")
    color_values = metadata.column(color_by) if color_by is not None else None

    degree = degrees(WeightedGraph(result.n, result.u, result.v, result.w))

    def _write_nodes(handle: TextIO) -> None:
        writer = csv.writer(handle, lineterminator="\n")
        extra = metadata.header if metadata else []
        writer.writerow(["id", "x", "y", "degree", "component"] + extra)
        for i in range(result.n):
            row = [i, _fmt(result.coords[i, 0]), _fmt(result.coords[i, 1]), int(degree[i])]
            row.append(int(result.component[i]))
            writer.writerow(row + (metadata.rows[i] if metadata else []))

    def _write_edges(handle: TextIO) -> None:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["source", "target", "weight"])
        for a, b, w in result.tree_edges:
            writer.writerow([a, b, _fmt(w)])

    written = {
        NODES_FILE: _write_atomically(out_dir / NODES_FILE, _write_nodes),
        EDGES_FILE: _write_atomically(out_dir / EDGES_FILE, _write_edges),
    }
    if svg:
        colors = (
            _node_colors(color_values) if color_values is not None else [DEFAULT_COLOR] * result.n
        )
        written[PLOT_FILE] = _write_atomically(
            out_dir / PLOT_FILE, lambda handle: _write_svg(handle, result, colors)
        )

    app_log.debug(f"Wrote {', '.join(written)} to {out_dir}")
    return written


def read_layout(out_dir: Union[str, Path]) -> LayoutTable:
    """Read ``nodes.csv`` and ``edges.csv`` back from an output directory."""
    out_dir = Path(out_dir)
    with open(out_dir / NODES_FILE, newline="", encoding="utf-8") as handle:
        nodes = list(csv.DictReader(handle))
    with open(out_dir / EDGES_FILE, newline="", encoding="utf-8") as handle:
        edges = list(csv.DictReader(handle))

    return LayoutTable(
        coords=np.array([[float(row["x"]), float(row["y"])] for row in nodes]).reshape(-1, 2),
        degree=np.array([int(row["degree"]) for row in nodes], dtype=np.int64),
        component=np.array([int(row["component"]) for row in nodes], dtype=np.int64),
        u=np.array([int(row["source"]) for row in edges], dtype=np.int64),
        v=np.array([int(row["target"]) for row in edges], dtype=np.int64),
        w=np.array([float(row["weight"]) for row in edges], dtype=np.float64),
    )

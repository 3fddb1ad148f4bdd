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

"""Barnes-Hut quadtree approximation of spring-electrical repulsion.

The tree is stored in flat arrays in breadth-first order. Each cell owns a
contiguous range of a point permutation, so leaf cells can be summed exactly
and internal cells act as point masses at their centroid.
"""

from typing import Optional

import numba
import numpy as np

from ._shared_files.config import get_config

LEAF_SIZE = 4
MAX_DEPTH = 48
JITTER_SCALE = 1e-4

_BUILD_FAILED = -1


@numba.njit(cache=True)
def _cell_centroid(x, y, perm, start, end):
    sx = 0.0
    sy = 0.0
    for t in range(start, end):
        sx += x[perm[t]]
        sy += y[perm[t]]
    count = end - start
    return sx / count, sy / count


@numba.njit(cache=True)
def _build_kernel(x, y, capacity):
    n = x.size
    perm = np.arange(n)
    scratch = np.empty(n, dtype=np.int64)

    center_x = np.empty(capacity)
    center_y = np.empty(capacity)
    half = np.empty(capacity)
    mass = np.empty(capacity)
    com_x = np.empty(capacity)
    com_y = np.empty(capacity)
    start = np.empty(capacity, dtype=np.int64)
    end = np.empty(capacity, dtype=np.int64)
    depth = np.empty(capacity, dtype=np.int64)
    first_child = np.full(capacity, -1, dtype=np.int64)
    n_children = np.zeros(capacity, dtype=np.int64)

    x_min, x_max = x.min(), x.max()
    y_min, y_max = y.min(), y.max()
    size = max(x_max - x_min, y_max - y_min)
    if size <= 0.0:
        size = 1.0

    center_x[0] = 0.5 * (x_min + x_max)
    center_y[0] = 0.5 * (y_min + y_max)
    half[0] = 0.5 * size
    start[0] = 0
    end[0] = n
    depth[0] = 0
    mass[0] = n
    cx, cy = _cell_centroid(x, y, perm, 0, n)
    com_x[0] = cx
    com_y[0] = cy

    counts = np.zeros(4, dtype=np.int64)
    offsets = np.zeros(4, dtype=np.int64)
    cells = 1
    head = 0
    while head < cells:
        c = head
        head += 1
        if end[c] - start[c] <= LEAF_SIZE or depth[c] >= MAX_DEPTH:
            continue

        counts[:] = 0
        for t in range(start[c], end[c]):
            j = perm[t]
            q = (1 if x[j] >= center_x[c] else 0) + (2 if y[j] >= center_y[c] else 0)
            counts[q] += 1

        non_empty = 0
        running = 0
        for q in range(4):
            offsets[q] = running
            running += counts[q]
            if counts[q] > 0:
                non_empty += 1
        if cells + non_empty > capacity:
            cells = _BUILD_FAILED
            break

        fill = offsets.copy()
        for t in range(start[c], end[c]):
            j = perm[t]
            q = (1 if x[j] >= center_x[c] else 0) + (2 if y[j] >= center_y[c] else 0)
            scratch[start[c] + fill[q]] = j
            fill[q] += 1
        for t in range(start[c], end[c]):
            perm[t] = scratch[t]

        first_child[c] = cells
        for q in range(4):
            if counts[q] == 0:
                continue
            k = cells
            cells += 1
            n_children[c] += 1
            half[k] = 0.5 * half[c]
            center_x[k] = center_x[c] + (half[k] if q & 1 else -half[k])
            center_y[k] = center_y[c] + (half[k] if q & 2 else -half[k])
            start[k] = start[c] + offsets[q]
            end[k] = start[k] + counts[q]
            depth[k] = depth[c] + 1
            mass[k] = counts[q]
            cx, cy = _cell_centroid(x, y, perm, start[k], end[k])
            com_x[k] = cx
            com_y[k] = cy

    tree = (center_x, center_y, half, mass, com_x, com_y, start, end, first_child, n_children)
    return cells, perm, tree


@numba.njit(parallel=True, cache=True)
def _repulsion_kernel(x, y, perm, tree, theta, strength):
    center_x, center_y, half, mass, com_x, com_y, start, end, first_child, n_children = tree
    n = x.size
    forces = np.zeros((n, 2))
    for i in numba.prange(n):
        stack = np.empty(4 * MAX_DEPTH + 8, dtype=np.int64)
        stack[0] = 0
        top = 1
        xi = x[i]
        yi = y[i]
        fx = 0.0
        fy = 0.0
        while top > 0:
            top -= 1
            c = stack[top]
            if n_children[c] == 0:
                for t in range(start[c], end[c]):
                    j = perm[t]
                    if j == i:
                        continue
                    dx = xi - x[j]
                    dy = yi - y[j]
                    d2 = dx * dx + dy * dy
                    if d2 > 0.0:
                        fx += dx / d2
                        fy += dy / d2
                continue

            dx = xi - com_x[c]
            dy = yi - com_y[c]
            d2 = dx * dx + dy * dy
            inside = abs(xi - center_x[c]) <= half[c] and abs(yi - center_y[c]) <= half[c]
            if not inside and d2 > 0.0 and 2.0 * half[c] <= theta * np.sqrt(d2):
                fx += mass[c] * dx / d2
                fy += mass[c] * dy / d2
            else:
                for k in range(first_child[c], first_child[c] + n_children[c]):
                    stack[top] = k
                    top += 1
        forces[i, 0] = strength * fx
        forces[i, 1] = strength * fy
    return forces


def separate_coincident(coords: np.ndarray, p: float, seed: int = 0) -> np.ndarray:
    """Move every repeated point by a seeded offset of length ``p * 1e-4``.

    The first point of each group of identical points, in id order, stays put.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape[0] < 2:
        return coords

    order = np.lexsort((coords[:, 1], coords[:, 0]))
    ordered = coords[order]
    repeats = np.all(ordered[1:] == ordered[:-1], axis=1)
    if not repeats.any():
        return coords

    moved = np.sort(order[1:][repeats])
    angles = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, moved.size)
    separated = coords.copy()
    separated[moved, 0] += JITTER_SCALE * p * np.cos(angles)
    separated[moved, 1] += JITTER_SCALE * p * np.sin(angles)
    return separated


def quadtree_repulsion(
    coords: np.ndarray,
    theta: float,
    p: float,
    seed: int = 0,
    repulsion: Optional[float] = None,
) -> np.ndarray:
    """Approximate the repulsion ``C * p**2 * (x_i - x_j) / |x_i - x_j|**2`` over all pairs.

    A cell acts as a single mass at its centroid when its side length divided by
    the distance to that centroid is at most ``theta`` and the point lies outside
    of it; ``theta`` close to zero opens every cell and gives the exact sum.

    Args:
        coords: ``(n, 2)`` finite coordinates.
        theta: Opening criterion.
        p: Point size.
        seed: Seed of the jitter that separates coincident points.
        repulsion: Constant ``C``; ``layout.repulsion`` when omitted.

    Returns:
        ``(n, 2)`` force vectors, reduced in a fixed per-node order.
    """
    repulsion = get_config("layout.repulsion") if repulsion is None else repulsion
    coords = separate_coincident(coords, p, seed)
    n = coords.shape[0]
    if n < 2:
        return np.zeros((n, 2))

    x = np.ascontiguousarray(coords[:, 0])
    y = np.ascontiguousarray(coords[:, 1])
    capacity = max(64, 2 * n)
    while True:
        cells, perm, tree = _build_kernel(x, y, capacity)
        if cells != _BUILD_FAILED:
            break
        capacity *= 2

    return _repulsion_kernel(x, y, perm, tree, float(theta), float(repulsion * p * p))

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

"""Helper methods shared by the pipeline phases."""

import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from functools import partial
from pathlib import Path
from typing import Any, Callable, Iterator, List, Sequence, TextIO, Union

import numba

from .errors import OutputUnwritable


def _execute_partials_in_threadpool(partials: Sequence[partial], n_jobs: int = 1) -> List[Any]:
    """Run independent partial functions and return their results in submission order."""
    if n_jobs <= 1 or len(partials) <= 1:
        return [partial_func() for partial_func in partials]

    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        futures = [pool.submit(partial_func) for partial_func in partials]
        return [future.result() for future in futures]


def _chunk_ranges(n: int, n_chunks: int) -> List[range]:
    """Split ``range(n)`` into at most ``n_chunks`` contiguous ranges."""
    n_chunks = max(1, min(n_chunks, n))
    bounds = [round(i * n / n_chunks) for i in range(n_chunks + 1)]
    return [range(bounds[i], bounds[i + 1]) for i in range(n_chunks) if bounds[i] < bounds[i + 1]]


def _write_atomically(path: Union[str, Path], write_fn: Callable[[TextIO], None]) -> Path:
    """Write a text file through a temporary file that is renamed into place."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            "w",
            dir=path.parent,
            prefix=f".{path.name}.",
            suffix=".tmp",
            delete=False,
            encoding="utf-8",
            newline="",
        ) as tmp_file:
            tmp_name = tmp_file.name
            try:
                write_fn(tmp_file)
                tmp_file.flush()
                os.fsync(tmp_file.fileno())
            except BaseException:
                tmp_file.close()
                os.remove(tmp_name)
                raise
        try:
            os.replace(tmp_name, path)
        except OSError:
            os.remove(tmp_name)
            raise
    except OSError as e:
        raise OutputUnwritable(f"Cannot write {path}: {e}") from e
    return path


@contextmanager
def _numba_threads(n_jobs: int) -> Iterator[int]:
    """Limit parallel numba kernels to ``n_jobs`` threads for the duration of the block."""
    previous = numba.get_num_threads()
    n_threads = max(1, min(n_jobs, numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n_threads)
    try:
        yield n_threads
    finally:
        numba.set_num_threads(previous)

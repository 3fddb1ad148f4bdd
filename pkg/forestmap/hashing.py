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

"""MinHash and weighted MinHash encoding of sparse binary sets and weighted vectors.

Binary sets are hashed with the multiply-add family ``(a * x + b) mod P`` over the
Mersenne prime ``P = 2**61 - 1``. Weighted vectors use Improved Consistent Weighted
Sampling; each sample is packed into one 64-bit component (dimension index in the
high 32 bits, zigzag-encoded quantized level in the low 32 bits).

All random parameters come from a counter-based generator keyed by the seed and the
(sample, dimension) counters, so nothing has to be tabulated per dimension.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numba
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ._shared_files.config import get_config
from .errors import (
    DataError,
    DimensionMismatch,
    EmptySet,
    HeterogeneousSignatures,
    LengthMismatch,
    ModeMismatch,
    NegativeWeight,
    ZeroVector,
)

MERSENNE_PRIME = (1 << 61) - 1
MAX_SEED = (1 << 64) - 1
MAX_ELEMENT = (1 << 32) - 1

_MERSENNE_PRIME = np.uint64(MERSENNE_PRIME)
_SHIFT_61 = np.uint64(61)
_SHIFT_32 = np.uint64(32)
_SHIFT_29 = np.uint64(29)
_LOW_29_MASK = np.uint64((1 << 29) - 1)
_LOW_32_MASK = np.uint64((1 << 32) - 1)

_GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_MUL_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_MUL_2 = np.uint64(0x94D049BB133111EB)

# Generator streams; one per random quantity.
_STREAM_A = 0
_STREAM_B = 1
_STREAM_R = (2, 3)
_STREAM_C = (4, 5)
_STREAM_BETA = 6

# Upper bound on (samples x positive dimensions) evaluated at once in weighted mode.
_ICWS_BLOCK = 1 << 20


class HashingMode(str, Enum):
    BINARY = "binary"
    WEIGHTED = "weighted"


class HashingConfig(BaseModel):
    """Parameters of the hash family.

    Attributes:
        d: Number of hash functions (binary) or samples (weighted).
        seed: 64-bit seed of the counter-based parameter generator.
        mode: ``binary`` for sets, ``weighted`` for non-negative vectors.
        dim: Vector dimensionality, required in weighted mode.
    """

    model_config = ConfigDict(frozen=True)

    d: int = Field(default_factory=lambda: get_config("hashing.d"))
    seed: int = Field(default_factory=lambda: get_config("hashing.seed"))
    mode: HashingMode = Field(default_factory=lambda: HashingMode(get_config("hashing.mode")))
    dim: Optional[int] = None

    @field_validator("d")
    @classmethod
    def _check_d(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"d must be at least 1, got {value}")
        return value

    @field_validator("seed")
    @classmethod
    def _check_seed(cls, value: int) -> int:
        if not 0 <= value <= MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {value}")
        return value

    @model_validator(mode="after")
    def _check_dim(self) -> "HashingConfig":
        if self.mode is HashingMode.WEIGHTED and (self.dim is None or self.dim < 1):
            raise ValueError("weighted mode requires dim >= 1")
        return self


@dataclass(frozen=True, eq=False)
class SparseBinarySet:
    """Strictly ascending 32-bit element ids of one binary item."""

    elements: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.elements)
        if values.ndim != 1:
            raise DataError("A sparse binary set must be one-dimensional")
        if values.size and (values.min() < 0 or values.max() > MAX_ELEMENT):
            raise DataError("Set elements must be 32-bit unsigned integers")
        values = values.astype(np.uint32)
        if values.size > 1 and not np.all(values[1:] > values[:-1]):
            raise DataError("Set elements must be strictly ascending without duplicates")
        values.setflags(write=False)
        object.__setattr__(self, "elements", values)

    @classmethod
    def from_unsorted(cls, values: Iterable[int]) -> "SparseBinarySet":
        return cls(np.unique(np.fromiter(values, dtype=np.int64)))

    def __len__(self) -> int:
        return int(self.elements.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseBinarySet):
            return NotImplemented
        return np.array_equal(self.elements, other.elements)

    def __hash__(self) -> int:
        return hash(self.elements.tobytes())


@dataclass(frozen=True, eq=False)
class WeightedVector:
    """Finite, non-negative weights of fixed dimensionality."""

    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_weights(self.weights))

    @property
    def dim(self) -> int:
        return int(self.weights.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedVector):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)


@dataclass(frozen=True, eq=False)
class Signature:
    """The d-component sketch of one item."""

    components: np.ndarray
    mode: HashingMode

    def __len__(self) -> int:
        return int(self.components.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Signature):
            return NotImplemented
        return self.mode is other.mode and np.array_equal(self.components, other.components)


@dataclass(frozen=True, eq=False)
class SignatureMatrix:
    """Signatures of n items stored as one ``(n, d)`` uint64 matrix."""

    components: np.ndarray
    mode: HashingMode

    def __post_init__(self):
        components = np.ascontiguousarray(self.components, dtype=np.uint64)
        if components.ndim != 2:
            raise HeterogeneousSignatures("Signature matrix must be two-dimensional")
        components.setflags(write=False)
        object.__setattr__(self, "components", components)

    @property
    def d(self) -> int:
        return int(self.components.shape[1])

    def __len__(self) -> int:
        return int(self.components.shape[0])

    def __getitem__(self, item: int) -> Signature:
        return Signature(self.components[item], self.mode)

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class HashParams:
    """Hash family parameters derived from a :class:`HashingConfig`.

    In binary mode the ``d`` multiply-add pairs are materialized in ``a`` and ``b``.
    In weighted mode the per-(sample, dimension) triples are produced on demand by
    :meth:`icws_parameters`.
    """

    mode: HashingMode
    d: int
    seed: int
    a: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None

    def icws_parameters(
        self, samples: np.ndarray, dims: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(r, ln_c, beta)`` with shape ``(len(samples), len(dims))``."""
        i = np.asarray(samples, dtype=np.uint64)[:, None]
        j = np.asarray(dims, dtype=np.uint64)[None, :]
        r = _gamma_2_1(self.seed, _STREAM_R, i, j)
        ln_c = np.log(_gamma_2_1(self.seed, _STREAM_C, i, j))
        beta = _unit_uniform(_counter_bits(self.seed, _STREAM_BETA, i, j))
        return r, ln_c, beta


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX_MUL_1
    z = (z ^ (z >> np.uint64(27))) * _MIX_MUL_2
    return z ^ (z >> np.uint64(31))


def _counter_bits(seed: int, stream: int, i, j=0) -> np.ndarray:
    """64 random bits for every counter ``(seed, stream, i, j)``, broadcast over i and j."""
    with np.errstate(over="ignore"):
        key = _mix64(np.uint64(seed) + np.uint64(stream + 1) * _GOLDEN_GAMMA)
        z = _mix64(key + np.asarray(i, dtype=np.uint64) * _GOLDEN_GAMMA)
        return _mix64(z + (np.asarray(j, dtype=np.uint64) + np.uint64(1)) * _MIX_MUL_1)


def _unit_uniform(bits: np.ndarray) -> np.ndarray:
    """Map random bits to doubles strictly inside (0, 1)."""
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / (1 << 53))


def _gamma_2_1(seed: int, streams: Tuple[int, int], i, j) -> np.ndarray:
    """Gamma(2, 1) draws as the sum of two Exponential(1) draws."""
    u1 = _unit_uniform(_counter_bits(seed, streams[0], i, j))
    u2 = _unit_uniform(_counter_bits(seed, streams[1], i, j))
    return -np.log(u1) - np.log(u2)


@lru_cache(maxsize=32)
def derive_hash_params(config: HashingConfig) -> HashParams:
    """Deterministically derive the hash family parameters of ``config``."""
    if config.mode is HashingMode.WEIGHTED:
        return HashParams(mode=config.mode, d=config.d, seed=config.seed)

    counters = np.arange(config.d, dtype=np.uint64)
    with np.errstate(over="ignore"):
        a = np.uint64(1) + _counter_bits(config.seed, _STREAM_A, counters) % np.uint64(
            MERSENNE_PRIME - 1
        )
        b = _counter_bits(config.seed, _STREAM_B, counters) % _MERSENNE_PRIME
    a.setflags(write=False)
    b.setflags(write=False)
    return HashParams(mode=config.mode, d=config.d, seed=config.seed, a=a, b=b)


@numba.njit(cache=True)
def _reduce_mersenne(x):
    x = (x & _MERSENNE_PRIME) + (x >> _SHIFT_61)
    if x >= _MERSENNE_PRIME:
        x -= _MERSENNE_PRIME
    return x


@numba.njit(cache=True)
def _hash_element(a_lo, a_hi, b, x):
    # a * x = a_hi * x * 2**32 + a_lo * x, and 2**61 == 1 (mod P)
    low = _reduce_mersenne(a_lo * x)
    high = a_hi * x
    high = _reduce_mersenne((high >> _SHIFT_29) + ((high & _LOW_29_MASK) << _SHIFT_32))
    return _reduce_mersenne(low + high + b)


@numba.njit(parallel=True, cache=True)
def _minhash_kernel(elements, indptr, a_lo, a_hi, b, out):
    n_items = indptr.shape[0] - 1
    d = b.shape[0]
    for item in numba.prange(n_items):
        for i in range(d):
            out[item, i] = _MERSENNE_PRIME
        for pos in range(indptr[item], indptr[item + 1]):
            x = np.uint64(elements[pos])
            for i in range(d):
                h = _hash_element(a_lo[i], a_hi[i], b[i], x)
                if h < out[item, i]:
                    out[item, i] = h


def _as_set(item: Union[SparseBinarySet, Iterable[int]]) -> SparseBinarySet:
    return item if isinstance(item, SparseBinarySet) else SparseBinarySet(np.asarray(item))


def _as_weights(values) -> np.ndarray:
    weights = np.array(values, dtype=np.float64)
    if weights.ndim != 1:
        raise DataError("A weighted vector must be one-dimensional")
    if not np.all(np.isfinite(weights)):
        raise DataError("Weights must be finite")
    if np.any(weights < 0):
        raise NegativeWeight(f"Negative weight at dimension {int(np.argmax(weights < 0))}")
    weights.setflags(write=False)
    return weights


def _require_mode(config: HashingConfig, mode: HashingMode) -> None:
    if config.mode is not mode:
        raise ModeMismatch(f"Configuration is in {config.mode.value} mode, not {mode.value}")


def minhash_signatures(
    sets: Sequence[Union[SparseBinarySet, Iterable[int]]], config: HashingConfig
) -> SignatureMatrix:
    """Compute the MinHash signatures of many binary sets.

    Args:
        sets: Sparse binary sets, or ascending integer sequences.
        config: A binary-mode hashing configuration.

    Returns:
        A signature matrix whose row ``i`` is the signature of ``sets[i]``.

    Raises:
        EmptySet: A set has no elements (an all-zero fingerprint row).
    """
    _require_mode(config, HashingMode.BINARY)
    params = derive_hash_params(config)

    sets = [_as_set(s) for s in sets]
    lengths = np.fromiter((len(s) for s in sets), dtype=np.int64, count=len(sets))
    if lengths.size and (empty := np.flatnonzero(lengths == 0)).size:
        raise EmptySet(f"Item {int(empty[0])} is an empty set")

    indptr = np.zeros(len(sets) + 1, dtype=np.int64)
    np.cumsum(lengths, out=indptr[1:])
    elements = (
        np.concatenate([s.elements for s in sets]) if sets else np.empty(0, dtype=np.uint32)
    )

    out = np.empty((len(sets), config.d), dtype=np.uint64)
    _minhash_kernel(
        elements,
        indptr,
        params.a & _LOW_32_MASK,
        params.a >> _SHIFT_32,
        params.b.copy(),
        out,
    )
    return SignatureMatrix(out, HashingMode.BINARY)


def minhash_signature(
    item: Union[SparseBinarySet, Iterable[int]], config: HashingConfig
) -> Signature:
    """MinHash signature of one set: component i is ``min over x of (a_i * x + b_i) mod P``."""
    return minhash_signatures([item], config)[0]


def _pack_components(dims: np.ndarray, levels: np.ndarray) -> np.ndarray:
    levels = np.asarray(levels, dtype=np.int64)
    zigzag = ((levels << 1) ^ (levels >> 63)).astype(np.uint64) & _LOW_32_MASK
    return (np.asarray(dims, dtype=np.uint64) << _SHIFT_32) | zigzag


def unpack_weighted_component(value: int) -> Tuple[int, int]:
    """Split a packed weighted component into ``(dimension, quantized level)``."""
    value = int(value)
    zigzag = value & 0xFFFFFFFF
    return value >> 32, (zigzag >> 1) ^ -(zigzag & 1)


def _icws_sample(weights: np.ndarray, params: HashParams) -> np.ndarray:
    dims = np.flatnonzero(weights > 0)
    if dims.size == 0:
        raise ZeroVector("All weights are zero")
    ln_w = np.log(weights[dims])

    out = np.empty(params.d, dtype=np.uint64)
    block = max(1, _ICWS_BLOCK // dims.size)
    for start in range(0, params.d, block):
        samples = np.arange(start, min(params.d, start + block))
        r, ln_c, beta = params.icws_parameters(samples, dims)
        t = np.floor(ln_w / r + beta)
        ln_y = r * (t - beta)
        ln_a = ln_c - ln_y - r
        best = np.argmin(ln_a, axis=1)
        rows = np.arange(samples.size)
        out[samples] = _pack_components(dims[best], t[rows, best])
    return out


def weighted_minhash_signatures(
    vectors: Sequence[Union[WeightedVector, Sequence[float]]], config: HashingConfig
) -> SignatureMatrix:
    """Compute weighted MinHash (ICWS) signatures of many vectors.

    Raises:
        ZeroVector: A vector has no positive weight.
        NegativeWeight: A vector has a negative weight.
        DimensionMismatch: A vector's length differs from ``config.dim``.
    """
    _require_mode(config, HashingMode.WEIGHTED)
    params = derive_hash_params(config)

    out = np.empty((len(vectors), config.d), dtype=np.uint64)
    for row, vector in enumerate(vectors):
        weights = vector.weights if isinstance(vector, WeightedVector) else _as_weights(vector)
        if weights.size != config.dim:
            raise DimensionMismatch(config.dim, weights.size)
        try:
            out[row] = _icws_sample(weights, params)
        except ZeroVector as e:
            raise ZeroVector(f"Item {row}: {e}") from e
    return SignatureMatrix(out, HashingMode.WEIGHTED)


def weighted_minhash_signature(
    vector: Union[WeightedVector, Sequence[float]], config: HashingConfig
) -> Signature:
    """Weighted MinHash signature of one vector."""
    return weighted_minhash_signatures([vector], config)[0]


def signature_distances(components: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Estimated Jaccard distances between each row of ``components`` and ``query``."""
    components = np.atleast_2d(components)
    return np.count_nonzero(components != query, axis=1) / components.shape[1]


def estimate_jaccard(a: Signature, b: Signature) -> float:
    """Fraction of components on which two signatures agree."""
    if a.mode is not b.mode:
        raise ModeMismatch(f"Cannot compare {a.mode.value} and {b.mode.value} signatures")
    if len(a) != len(b):
        raise LengthMismatch(f"Cannot compare signatures of length {len(a)} and {len(b)}")
    return float(np.count_nonzero(a.components == b.components)) / len(a)


def exact_jaccard(
    a: Union[SparseBinarySet, Iterable[int]], b: Union[SparseBinarySet, Iterable[int]]
) -> float:
    """Exact Jaccard similarity ``|A & B| / |A | B|`` of two sets."""
    a, b = _as_set(a), _as_set(b)
    if len(a) == 0 or len(b) == 0:
        raise EmptySet("Jaccard similarity is undefined for empty sets")
    intersection = np.intersect1d(a.elements, b.elements, assume_unique=True).size
    return intersection / (len(a) + len(b) - intersection)


def exact_weighted_jaccard(
    u: Union[WeightedVector, Sequence[float]], v: Union[WeightedVector, Sequence[float]]
) -> float:
    """Weighted Jaccard similarity ``sum(min(u, v)) / sum(max(u, v))``."""
    u = u.weights if isinstance(u, WeightedVector) else _as_weights(u)
    v = v.weights if isinstance(v, WeightedVector) else _as_weights(v)
    if u.size != v.size:
        raise DimensionMismatch(u.size, v.size)
    denominator = np.maximum(u, v).sum()
    if denominator == 0:
        raise ZeroVector("Weighted Jaccard similarity is undefined for two zero vectors")
    return float(np.minimum(u, v).sum() / denominator)


def stack_signatures(signatures: Sequence[Signature]) -> SignatureMatrix:
    """Stack individual signatures into a :class:`SignatureMatrix`."""
    if isinstance(signatures, SignatureMatrix):
        return signatures
    if not signatures:
        raise HeterogeneousSignatures("No signatures given")
    mode = signatures[0].mode
    d = len(signatures[0])
    for index, signature in enumerate(signatures):
        if signature.mode is not mode or len(signature) != d:
            raise HeterogeneousSignatures(
                f"Signature {index} ({signature.mode.value}, d={len(signature)}) differs "
                f"from signature 0 ({mode.value}, d={d})"
            )
    return SignatureMatrix(np.vstack([s.components for s in signatures]), mode)


def hash_items(
    items: Sequence[Union[SparseBinarySet, WeightedVector]], config: HashingConfig
) -> SignatureMatrix:
    """Dispatch to the binary or weighted encoder according to ``config.mode``."""
    if config.mode is HashingMode.BINARY:
        return minhash_signatures(items, config)
    return weighted_minhash_signatures(items, config)


__all__: List[str] = [
    "HashingConfig",
    "HashingMode",
    "HashParams",
    "Signature",
    "SignatureMatrix",
    "SparseBinarySet",
    "WeightedVector",
    "derive_hash_params",
    "estimate_jaccard",
    "exact_jaccard",
    "exact_weighted_jaccard",
    "hash_items",
    "minhash_signature",
    "minhash_signatures",
    "signature_distances",
    "stack_signatures",
    "unpack_weighted_component",
    "weighted_minhash_signature",
    "weighted_minhash_signatures",
]

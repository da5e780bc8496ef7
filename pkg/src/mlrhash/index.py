"""
Bit-packed hash codes and exact Hamming linear scan.

Code i occupies `words_per_code` consecutive uint64 words; bit b of the code is
bit (b mod 64) of word b // 64, with +1 stored as 1 and -1 as 0. Pad bits past
L stay zero, so XOR followed by popcount needs no masking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from numpy.typing import NDArray

from .errors import UsageError
from .linalg import DenseMatrix


WORD_BITS = 64
_BIT_WEIGHTS = np.left_shift(np.uint64(1), np.arange(WORD_BITS, dtype=np.uint64))


@dataclass(frozen=True)
class PackedCodes:
    bits: int
    words: NDArray[np.uint64]

    def __post_init__(self) -> None:
        if self.words.ndim != 2 or self.words.shape[1] != words_per_code(self.bits):
            raise UsageError(f"word array of shape {self.words.shape} does not hold {self.bits}-bit codes")

    @property
    def n(self) -> int:
        return int(self.words.shape[0])

    @property
    def words_per_code(self) -> int:
        return int(self.words.shape[1])

    def code(self, i: int) -> "PackedCodes":
        self._check_index(i)
        return PackedCodes(bits=self.bits, words=self.words[i : i + 1])

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise UsageError(f"code index {i} outside [0, {self.n})")


def words_per_code(bits: int) -> int:
    return -(-bits // WORD_BITS)


def pack(h: DenseMatrix) -> PackedCodes:
    """Pack an L x k matrix of +/-1 codes (one code per column)."""
    h = np.asarray(h)
    if h.ndim != 2:
        raise UsageError(f"code matrix must be two-dimensional, got shape {h.shape}")
    if not np.all((h == 1) | (h == -1)):
        raise UsageError("code entries must be -1 or +1")
    bits, k = h.shape
    wpc = words_per_code(bits)
    padded = np.zeros((k, wpc * WORD_BITS), dtype=np.uint64)
    padded[:, :bits] = (h.T > 0).astype(np.uint64)
    words = np.bitwise_or.reduce(padded.reshape(k, wpc, WORD_BITS) * _BIT_WEIGHTS, axis=2)
    return PackedCodes(bits=bits, words=words.astype(np.uint64))


def unpack(codes: PackedCodes) -> DenseMatrix:
    """Inverse of `pack`: an L x n matrix of +/-1."""
    flags = (codes.words[:, :, None] & _BIT_WEIGHTS) != 0
    flat = flags.reshape(codes.n, -1)[:, : codes.bits]
    return np.where(flat.T, 1.0, -1.0)


def hamming(codes: PackedCodes, i: int, j: int) -> int:
    codes._check_index(i)
    codes._check_index(j)
    return int(np.bitwise_count(codes.words[i] ^ codes.words[j]).sum())


def distances(db: PackedCodes, query: PackedCodes) -> NDArray[np.int64]:
    """Hamming distance from a single packed query code to every database code."""
    _check_compatible(db, query)
    if query.n != 1:
        raise UsageError(f"expected a single query code, got {query.n}")
    return np.bitwise_count(db.words ^ query.words[0]).sum(axis=1, dtype=np.int64)


def knn(db: PackedCodes, query: PackedCodes, k: int) -> List[Tuple[int, int]]:
    """The k nearest codes ordered by (distance, database index)."""
    if not 1 <= k <= db.n:
        raise UsageError(f"k must lie in [1, {db.n}], got {k}")
    dist = distances(db, query)
    order = np.argsort(dist, kind="stable")[:k]
    return [(int(index), int(dist[index])) for index in order]


def rank_all(db: PackedCodes, queries: PackedCodes) -> Tuple[NDArray[np.int64], NDArray[np.int64]]:
    """
    Full Hamming ranking of the database for every query.

    Returns (order, dist): row q of `order` is the (distance, index)-sorted
    permutation of database indices, and row q of `dist` the matching distances.
    """
    _check_compatible(db, queries)
    order = np.empty((queries.n, db.n), dtype=np.int64)
    dist = np.empty((queries.n, db.n), dtype=np.int64)
    for q in range(queries.n):
        row = np.bitwise_count(db.words ^ queries.words[q]).sum(axis=1, dtype=np.int64)
        order[q] = np.argsort(row, kind="stable")
        dist[q] = row[order[q]]
    return order, dist


def _check_compatible(db: PackedCodes, other: PackedCodes) -> None:
    if db.bits != other.bits:
        raise UsageError(f"bit length mismatch: database {db.bits}, query {other.bits}")

"""
Datasets, the MLRH matrix file format, label encoding, splitting and synthetic data.

Samples are stored column-wise: a dataset of n samples with d features holds a
d x n feature matrix and a c x n label matrix with entries in {-1, +1}.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from .errors import DataError, FormatError, UsageError
from .linalg import DenseMatrix, SeededRng, as_dense
from .persistence.atomic import atomic_write_bytes


LOGGER = logging.getLogger("mlrhash.data")

MATRIX_MAGIC = b"MLRH"
MATRIX_HEADER = struct.Struct("<4sBII")


class MatrixDtype(IntEnum):
    F32 = 0
    I8 = 1

    @property
    def numpy_dtype(self) -> np.dtype:
        return np.dtype("<f4") if self is MatrixDtype.F32 else np.dtype("i1")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (d x n) and +/-1 label matrix (c x n) sharing n columns."""

    features: DenseMatrix
    labels: DenseMatrix

    def __post_init__(self) -> None:
        if self.features.shape[1] != self.labels.shape[1]:
            raise DataError(
                f"features have {self.features.shape[1]} samples but labels have {self.labels.shape[1]}"
            )
        check_labels(self.labels)

    @property
    def n(self) -> int:
        return int(self.features.shape[1])

    @property
    def class_ids(self) -> NDArray[np.int64]:
        """Argmax label row per sample (the first +1 for multi-label columns)."""
        return np.argmax(self.labels, axis=0)

    def subset(self, columns: NDArray[np.int64]) -> "Dataset":
        return Dataset(features=self.features[:, columns], labels=self.labels[:, columns])


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int
    dim: int
    per_class: int
    cluster_spread: float = 0.3
    center_scale: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        for name in ("num_classes", "dim", "per_class"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.cluster_spread < 0:
            raise UsageError(f"cluster_spread must be non-negative, got {self.cluster_spread}")
        if not self.center_scale > 0:
            raise UsageError(f"center_scale must be positive, got {self.center_scale}")


def check_labels(labels: DenseMatrix) -> None:
    if not np.all((labels == 1.0) | (labels == -1.0)):
        raise DataError("label entries must be -1 or +1")
    if labels.shape[1] and not np.all(np.any(labels == 1.0, axis=0)):
        raise DataError("every label column needs at least one +1 entry")


def encode_matrix(m: DenseMatrix, dtype: MatrixDtype) -> bytes:
    """Serialize *m* as a complete MatrixFile blob (header + row-major payload)."""
    m = as_dense(m, "matrix")
    dtype = MatrixDtype(dtype)
    if dtype is MatrixDtype.I8 and not np.all((m == 1.0) | (m == -1.0)):
        raise UsageError("i8 matrices may only contain -1 and +1")
    rows, cols = m.shape
    header = MATRIX_HEADER.pack(MATRIX_MAGIC, int(dtype), rows, cols)
    payload = np.ascontiguousarray(m.astype(dtype.numpy_dtype)).tobytes(order="C")
    return header + payload


def decode_matrix(data: bytes, offset: int = 0, as_labels: bool = False) -> Tuple[DenseMatrix, int]:
    """Parse a MatrixFile blob starting at *offset*; returns the matrix and the end offset."""
    if len(data) - offset < MATRIX_HEADER.size:
        raise FormatError("truncated matrix header", offset=len(data))
    magic, dtype_code, rows, cols = MATRIX_HEADER.unpack_from(data, offset)
    if magic != MATRIX_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MATRIX_MAGIC!r}", offset=offset)
    try:
        dtype = MatrixDtype(dtype_code)
    except ValueError:
        raise FormatError(f"unknown dtype code {dtype_code}", offset=offset + 4) from None

    start = offset + MATRIX_HEADER.size
    end = start + rows * cols * dtype.numpy_dtype.itemsize
    if len(data) < end:
        raise FormatError(f"payload truncated: need {end - start} bytes for {rows}x{cols}", offset=len(data))
    values = np.frombuffer(data, dtype=dtype.numpy_dtype, count=rows * cols, offset=start)
    matrix = values.astype(np.float64).reshape(rows, cols)

    if not np.all(np.isfinite(matrix)):
        bad = int(np.flatnonzero(~np.isfinite(matrix.ravel()))[0])
        raise FormatError("non-finite entry in payload", offset=start + bad * dtype.numpy_dtype.itemsize)
    if dtype is MatrixDtype.I8 and as_labels:
        invalid = np.flatnonzero((matrix.ravel() != 1.0) & (matrix.ravel() != -1.0))
        if invalid.size:
            raise FormatError("label payload entries must be -1 or +1", offset=start + int(invalid[0]))
    return matrix, end


def load_matrix(path: Path, as_labels: bool = False) -> DenseMatrix:
    data = Path(path).read_bytes()
    matrix, end = decode_matrix(data, as_labels=as_labels)
    if end != len(data):
        raise FormatError(f"{len(data) - end} trailing bytes after payload", offset=end)
    LOGGER.debug("Loaded %dx%d matrix from %s", matrix.shape[0], matrix.shape[1], path)
    return matrix


def save_matrix(m: DenseMatrix, dtype: MatrixDtype, path: Path) -> Path:
    return atomic_write_bytes(Path(path), encode_matrix(m, dtype))


def one_hot_pm(class_ids: Sequence[int], c: int) -> DenseMatrix:
    """c x n matrix with +1 at row class_ids[i] of column i and -1 elsewhere."""
    ids = np.asarray(class_ids, dtype=np.int64).reshape(-1)
    if c < 1:
        raise UsageError(f"class count must be at least 1, got {c}")
    if ids.size and (ids.min() < 0 or ids.max() >= c):
        raise UsageError(f"class ids must lie in [0, {c}), got range [{ids.min()}, {ids.max()}]")
    labels = -np.ones((c, ids.size))
    labels[ids, np.arange(ids.size)] = 1.0
    return labels


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    """Gaussian clusters: one center per class, samples ordered class by class."""
    spec.validate()
    rng = SeededRng(spec.seed)
    centers = rng.standard_normal((spec.dim, spec.num_classes)) * spec.center_scale
    noise = rng.standard_normal((spec.dim, spec.num_classes * spec.per_class)) * spec.cluster_spread
    class_ids = np.repeat(np.arange(spec.num_classes), spec.per_class)
    features = centers[:, class_ids] + noise
    return Dataset(features=features, labels=one_hot_pm(class_ids, spec.num_classes))


def split(ds: Dataset, query_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Stratified, seeded train/query partition.

    The query set holds round(query_fraction * n) columns. Each class receives the
    floor of its proportional share; the remaining slots go to the classes with the
    largest fractional remainders, preferring classes that keep a training sample.
    """
    if not 0.0 < query_fraction < 1.0:
        raise UsageError(f"query fraction must lie in (0, 1), got {query_fraction}")
    rng = SeededRng(seed)
    class_ids = ds.class_ids
    classes = np.unique(class_ids)
    members = [np.flatnonzero(class_ids == label) for label in classes]
    counts = np.array([len(group) for group in members])

    total = int(np.floor(query_fraction * ds.n + 0.5))
    shares = query_fraction * counts
    quota = np.floor(shares).astype(np.int64)
    remainders = shares - quota
    leftover = total - int(quota.sum())
    ranked = sorted(
        range(len(classes)),
        key=lambda k: (quota[k] + 1 >= counts[k], -remainders[k], k),
    )
    for k in ranked[:leftover]:
        quota[k] += 1

    query_cols: List[int] = []
    train_cols: List[int] = []
    for group, take in zip(members, quota):
        shuffled = group[rng.permutation(len(group))]
        query_cols.extend(shuffled[:take].tolist())
        train_cols.extend(shuffled[take:].tolist())
    if not query_cols or not train_cols:
        raise UsageError(f"query fraction {query_fraction} leaves an empty partition for n={ds.n}")

    train_idx = np.sort(np.array(train_cols, dtype=np.int64))
    query_idx = np.sort(np.array(query_cols, dtype=np.int64))
    LOGGER.debug("Split %d samples into %d train / %d query", ds.n, train_idx.size, query_idx.size)
    return ds.subset(train_idx), ds.subset(query_idx)


def load_feature_csv(path: Path) -> DenseMatrix:
    """One sample per line of comma-separated reals, returned as a d x n matrix."""
    try:
        rows = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DataError(f"could not parse feature CSV {path}: {exc}") from exc
    return as_dense(rows.T, "features")


def load_csv(features_path: Path, ids_path: Path, num_classes: Optional[int] = None) -> Dataset:
    """Feature CSV plus one integer class id per line."""
    features = load_feature_csv(features_path)
    try:
        ids = np.loadtxt(ids_path, dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise DataError(f"could not parse class ids {ids_path}: {exc}") from exc
    if features.shape[1] != ids.shape[0]:
        raise DataError(f"{features.shape[1]} feature rows but {ids.shape[0]} class ids")
    if ids.size == 0:
        raise DataError(f"no samples in {features_path}")
    c = num_classes if num_classes is not None else int(ids.max()) + 1
    return Dataset(features=features, labels=one_hot_pm(ids, c))

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .config import NumericsConfig
from .errors import NumericalError, UsageError
from .linalg import DEFAULT_NUMERICS, DenseMatrix, SeededRng, as_dense


LOGGER = logging.getLogger("mlrhash.features")

SIGMA_PAIRS = 1000


@dataclass(frozen=True)
class RbfMap:
    """Gaussian kernel map onto m anchor samples (anchors stored as d x m columns)."""

    anchors: DenseMatrix
    sigma: float

    @property
    def m(self) -> int:
        return int(self.anchors.shape[1])

    @property
    def dim(self) -> int:
        return int(self.anchors.shape[0])


def fit_rbf(v: DenseMatrix, m: int, seed: int, numerics: NumericsConfig = DEFAULT_NUMERICS) -> RbfMap:
    """
    Pick m distinct training columns as anchors and estimate the kernel width.

    The width is the mean Euclidean distance over min(1000, n*m) (sample, anchor)
    pairs: every pair when n*m is small enough, seeded random pairs otherwise.
    """
    v = as_dense(v, "features")
    d, n = v.shape
    if m < 1 or m > n:
        raise UsageError(f"anchor count must lie in [1, {n}], got {m}")
    rng = SeededRng(seed)
    anchor_idx = rng.choice(n, size=m, replace=False)
    anchors = v[:, anchor_idx].copy()

    if n * m <= SIGMA_PAIRS:
        sample_idx, anchor_pos = np.divmod(np.arange(n * m), m)
    else:
        sample_idx = rng.integers(n, SIGMA_PAIRS)
        anchor_pos = rng.integers(m, SIGMA_PAIRS)
    distances = np.linalg.norm(v[:, sample_idx] - anchors[:, anchor_pos], axis=0)
    sigma = float(distances.mean())
    if sigma <= numerics.sigma_floor:
        raise NumericalError(f"degenerate feature spread: estimated kernel width {sigma:.3e}")

    LOGGER.info("Fitted RBF map with %d anchors on %d-D features (sigma=%.4g)", m, d, sigma)
    return RbfMap(anchors=anchors, sigma=sigma)


def apply_rbf(rbf: RbfMap, x: DenseMatrix) -> DenseMatrix:
    """Return the m x k matrix exp(-||x_i - a_j||^2 / (2 sigma^2)), kept inside (0, 1]."""
    x = as_dense(x, "features")
    if x.shape[0] != rbf.dim:
        raise UsageError(f"features have {x.shape[0]} rows, RBF anchors expect {rbf.dim}")
    sq_dist = cdist(rbf.anchors.T, x.T, metric="sqeuclidean")
    mapped = np.exp(-sq_dist / (2.0 * rbf.sigma**2))
    return np.maximum(mapped, np.finfo(np.float64).tiny)

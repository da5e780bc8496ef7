"""
Dense float64 kernels used by the trainer.

Matrices are plain two-dimensional ``numpy`` arrays of dtype float64. The
symmetric eigensolver is a round-robin cyclic Jacobi method: every round applies
n/2 disjoint plane rotations at once, so a sweep is n-1 vectorised rounds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .config import NumericsConfig
from .errors import NumericalError, UsageError


LOGGER = logging.getLogger("mlrhash.linalg")

DenseMatrix = NDArray[np.float64]
DEFAULT_NUMERICS = NumericsConfig()


@dataclass(frozen=True)
class SymEigen:
    """Eigenvalues in ascending order and orthonormal eigenvectors as columns."""

    values: NDArray[np.float64]
    vectors: DenseMatrix


class SeededRng:
    """
    Deterministic generator: numpy's PCG64 bit generator seeded with a u64.

    Identical seeds produce identical streams on every platform numpy supports.
    """

    algorithm = "PCG64"

    def __init__(self, seed: int) -> None:
        if seed < 0 or seed >= 2**64:
            raise UsageError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def standard_normal(self, shape: Tuple[int, ...]) -> NDArray[np.float64]:
        return self.generator.standard_normal(shape)

    def permutation(self, n: int) -> NDArray[np.int64]:
        return self.generator.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> NDArray[np.int64]:
        return self.generator.choice(n, size=size, replace=replace)

    def integers(self, high: int, size: int) -> NDArray[np.int64]:
        return self.generator.integers(0, high, size=size)


def as_dense(a, name: str = "matrix") -> DenseMatrix:
    """Widen *a* to a 2-D float64 array and reject non-finite entries."""
    array = np.asarray(a, dtype=np.float64)
    if array.ndim != 2:
        raise UsageError(f"{name} must be two-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise UsageError(f"{name} contains NaN or Inf entries")
    return array


def matmul(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    a = as_dense(a, "a")
    b = as_dense(b, "b")
    if a.shape[1] != b.shape[0]:
        raise UsageError(f"cannot multiply {a.shape} by {b.shape}")
    return _finite(a @ b, "matrix product")


def frob_norm_sq(a: DenseMatrix) -> float:
    array = np.asarray(a, dtype=np.float64)
    return float(np.sum(array * array))


def sym_eigen(a: DenseMatrix, numerics: NumericsConfig = DEFAULT_NUMERICS) -> SymEigen:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations."""
    a = _require_symmetric(a, "a", numerics)
    n = a.shape[0]
    work = 0.5 * (a + a.T)
    vectors = np.eye(n)
    scale = float(np.linalg.norm(work))
    threshold = numerics.jacobi_tol * scale
    rounds = _round_robin_pairs(n)

    sweeps = 0
    while _off_diagonal_norm(work) > threshold:
        if sweeps >= numerics.jacobi_max_sweeps:
            raise NumericalError(
                f"Jacobi eigensolver did not converge in {numerics.jacobi_max_sweeps} sweeps "
                f"(off-diagonal mass {_off_diagonal_norm(work):.3e})"
            )
        for p, q in rounds:
            _rotate(work, vectors, p, q)
        sweeps += 1

    order = np.argsort(np.diag(work), kind="stable")
    LOGGER.debug("Jacobi converged on %dx%d matrix after %d sweeps", n, n, sweeps)
    return SymEigen(values=np.diag(work)[order].copy(), vectors=vectors[:, order].copy())


class RidgeSolver:
    """
    Cholesky factor of (a + lam*I), reusable across right-hand sides.

    Factorize once, then call `solve` for every b.
    """

    def __init__(self, a: DenseMatrix, lam: float, numerics: NumericsConfig = DEFAULT_NUMERICS) -> None:
        if not lam > 0:
            raise UsageError(f"ridge parameter must be positive, got {lam}")
        a = _require_symmetric(a, "a", numerics)
        self.size = a.shape[0]
        regularised = 0.5 * (a + a.T) + lam * np.eye(self.size)
        try:
            self._factor = cho_factor(regularised, lower=False, check_finite=False)
        except LinAlgError as exc:
            raise NumericalError(f"Cholesky factorization failed: {exc}") from exc

    def solve(self, b: DenseMatrix) -> DenseMatrix:
        b = as_dense(b, "b")
        if b.shape[0] != self.size:
            raise UsageError(f"right-hand side has {b.shape[0]} rows, expected {self.size}")
        return _finite(cho_solve(self._factor, b, check_finite=False), "ridge solution")


def ridge_solve(
    a: DenseMatrix,
    lam: float,
    b: DenseMatrix,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
) -> DenseMatrix:
    """Return X = (a + lam*I)^-1 b."""
    return RidgeSolver(a, lam, numerics).solve(b)


def sylvester_solve(
    a: DenseMatrix,
    b: DenseMatrix,
    c: DenseMatrix,
    numerics: NumericsConfig = DEFAULT_NUMERICS,
    b_eigen: Optional[SymEigen] = None,
) -> DenseMatrix:
    """
    Solve a W + W b = c for symmetric a (PSD) and b (PD).

    Both coefficients are diagonalised, a = U Da U^T and b = V Db V^T, after which
    the transformed equation decouples entrywise. Pass *b_eigen* to reuse the
    decomposition of b across calls with the same right coefficient.
    """
    a = _require_symmetric(a, "a", numerics)
    b = _require_symmetric(b, "b", numerics)
    c = as_dense(c, "c")
    if c.shape != (a.shape[0], b.shape[0]):
        raise UsageError(f"c must be {a.shape[0]}x{b.shape[0]}, got {c.shape}")

    eig_a = sym_eigen(a, numerics)
    eig_b = b_eigen if b_eigen is not None else sym_eigen(b, numerics)
    if eig_b.values.shape[0] != b.shape[0]:
        raise UsageError(f"decomposition of b has order {eig_b.values.shape[0]}, expected {b.shape[0]}")
    denominators = eig_a.values[:, None] + eig_b.values[None, :]
    if np.any(denominators <= numerics.denominator_floor):
        raise NumericalError(
            f"Sylvester denominators reach {denominators.min():.3e}; b is not positive definite"
        )
    u, v = eig_a.vectors, eig_b.vectors
    w = u @ ((u.T @ c @ v) / denominators) @ v.T
    w = _finite(w, "Sylvester solution")

    residual = float(np.linalg.norm(a @ w + w @ b - c))
    bound = numerics.residual_tol * max(1.0, float(np.linalg.norm(c)))
    if residual > bound:
        LOGGER.warning("Sylvester residual %.3e exceeds bound %.3e", residual, bound)
    return w


def _require_symmetric(a: DenseMatrix, name: str, numerics: NumericsConfig) -> DenseMatrix:
    a = as_dense(a, name)
    if a.shape[0] != a.shape[1]:
        raise UsageError(f"{name} must be square, got {a.shape}")
    asymmetry = float(np.linalg.norm(a - a.T))
    if asymmetry > numerics.symmetry_tol * float(np.linalg.norm(a)):
        raise UsageError(f"{name} is not symmetric (asymmetry {asymmetry:.3e})")
    return a


def _round_robin_pairs(n: int) -> List[Tuple[NDArray[np.intp], NDArray[np.intp]]]:
    """Circle-method schedule: n-1 (or n) rounds of disjoint index pairs covering every pair once."""
    if n < 2:
        return []
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        rounds.append(
            (np.array([p for p, _ in pairs], dtype=np.intp), np.array([q for _, q in pairs], dtype=np.intp))
        )
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _rotate(work: DenseMatrix, vectors: DenseMatrix, p: NDArray[np.intp], q: NDArray[np.intp]) -> None:
    """Annihilate work[p, q] for every pair of the round with one rotation each."""
    apq = work[p, q]
    active = apq != 0.0
    if not np.any(active):
        return
    p, q, apq = p[active], q[active], apq[active]
    theta = (work[q, q] - work[p, p]) / (2.0 * apq)
    sign = np.where(theta >= 0.0, 1.0, -1.0)
    t = sign / (np.abs(theta) + np.hypot(theta, 1.0))
    cos = 1.0 / np.hypot(t, 1.0)
    sin = t * cos

    col_p, col_q = work[:, p].copy(), work[:, q].copy()
    work[:, p] = cos * col_p - sin * col_q
    work[:, q] = sin * col_p + cos * col_q
    row_p, row_q = work[p, :].copy(), work[q, :].copy()
    work[p, :] = cos[:, None] * row_p - sin[:, None] * row_q
    work[q, :] = sin[:, None] * row_p + cos[:, None] * row_q
    work[p, q] = 0.0
    work[q, p] = 0.0

    vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
    vectors[:, p] = cos * vec_p - sin * vec_q
    vectors[:, q] = sin * vec_p + cos * vec_q


def _off_diagonal_norm(work: DenseMatrix) -> float:
    off = work.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def _finite(result: DenseMatrix, label: str) -> DenseMatrix:
    if not np.all(np.isfinite(result)):
        raise NumericalError(f"{label} contains NaN or Inf entries")
    return result

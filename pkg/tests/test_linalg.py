import numpy as np
import pytest

from mlrhash.config import NumericsConfig
from mlrhash.errors import NumericalError, UsageError
from mlrhash.linalg import RidgeSolver, SeededRng, as_dense, matmul, ridge_solve, sym_eigen, sylvester_solve


def _random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return a + a.T


def _kron_sylvester(a, b, c):
    """vec(AW + WB) = (I kron A + B^T kron I) vec(W), column-major vec."""
    rows, cols = c.shape
    system = np.kron(np.eye(cols), a) + np.kron(b.T, np.eye(rows))
    return np.linalg.solve(system, c.flatten(order="F")).reshape((rows, cols), order="F")


@pytest.mark.parametrize("n", [1, 2, 5, 8, 13])
def test_sym_eigen_reconstructs_matrix(n):
    rng = np.random.default_rng(n)
    a = _random_symmetric(rng, n)
    eig = sym_eigen(a)

    assert np.all(np.diff(eig.values) >= 0)
    np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(eig.vectors @ np.diag(eig.values) @ eig.vectors.T, a, atol=1e-9)
    np.testing.assert_allclose(eig.values, np.linalg.eigvalsh(a), atol=1e-9)


def test_sym_eigen_reconstructs_random_matrices():
    rng = np.random.default_rng(20)
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        a = _random_symmetric(rng, n)
        eig = sym_eigen(a)
        np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(n), atol=1e-9)
        np.testing.assert_allclose(eig.vectors @ np.diag(eig.values) @ eig.vectors.T, a, atol=1e-8)


def test_sym_eigen_handles_zero_and_diagonal_matrices():
    zero = sym_eigen(np.zeros((4, 4)))
    assert np.all(zero.values == 0)

    diag = sym_eigen(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_allclose(diag.values, [-1.0, 2.0, 3.0])


def test_sym_eigen_rejects_asymmetric_input():
    with pytest.raises(UsageError):
        sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(UsageError):
        sym_eigen(np.ones((2, 3)))


def test_sym_eigen_reports_sweep_exhaustion():
    rng = np.random.default_rng(3)
    numerics = NumericsConfig(jacobi_max_sweeps=0)
    with pytest.raises(NumericalError):
        sym_eigen(_random_symmetric(rng, 6), numerics)


def test_ridge_solve_satisfies_normal_equations():
    rng = np.random.default_rng(11)
    for _ in range(50):
        d, k = rng.integers(1, 10, size=2)
        x = rng.standard_normal((d, 3 * d))
        a = x @ x.T
        b = rng.standard_normal((d, k))
        lam = float(rng.uniform(0.1, 2.0))
        solution = ridge_solve(a, lam, b)
        np.testing.assert_allclose((a + lam * np.eye(d)) @ solution, b, atol=1e-8)


def test_ridge_solver_reuses_factor_and_validates():
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    solver = RidgeSolver(a, 1.0)
    first = solver.solve(np.array([[1.0], [0.0]]))
    second = solver.solve(np.array([[0.0], [1.0]]))
    np.testing.assert_allclose(np.hstack([first, second]), np.linalg.inv(a + np.eye(2)), atol=1e-12)

    with pytest.raises(UsageError):
        RidgeSolver(a, 0.0)
    with pytest.raises(UsageError):
        solver.solve(np.ones((3, 1)))


def test_sylvester_matches_kronecker_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        bits, classes = rng.integers(1, 17, size=2)
        n = int(rng.integers(1, 30))
        h = np.where(rng.standard_normal((bits, n)) >= 0, 1.0, -1.0)
        y = np.where(rng.standard_normal((classes, n)) >= 0, 1.0, -1.0)
        alpha, lam = rng.uniform(0.1, 3.0, size=2)
        a = h @ h.T
        b = alpha * (y @ y.T) + lam * np.eye(classes)
        c = rng.standard_normal((bits, classes))

        w = sylvester_solve(a, b, c)
        np.testing.assert_allclose(w, _kron_sylvester(a, b, c), atol=1e-8)
        assert np.linalg.norm(a @ w + w @ b - c) <= 1e-8 * max(1.0, np.linalg.norm(c))


def test_sylvester_rejects_singular_sum():
    with pytest.raises(NumericalError):
        sylvester_solve(np.zeros((2, 2)), np.zeros((3, 3)), np.ones((2, 3)))


def test_sylvester_rejects_mismatched_right_hand_side():
    with pytest.raises(UsageError):
        sylvester_solve(np.eye(2), np.eye(3), np.ones((3, 2)))


def test_seeded_rng_is_reproducible():
    first = SeededRng(42).standard_normal((3, 4))
    second = SeededRng(42).standard_normal((3, 4))
    assert np.array_equal(first, second)
    assert not np.array_equal(first, SeededRng(43).standard_normal((3, 4)))
    assert SeededRng(2**64 - 1).permutation(5).shape == (5,)

    with pytest.raises(UsageError):
        SeededRng(-1)
    with pytest.raises(UsageError):
        SeededRng(2**64)


def test_dense_helpers_validate_inputs():
    with pytest.raises(UsageError):
        as_dense(np.array([1.0, np.nan]).reshape(1, 2))
    with pytest.raises(UsageError):
        as_dense(np.ones(3))
    with pytest.raises(UsageError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))
    np.testing.assert_array_equal(matmul(np.ones((2, 3)), np.ones((3, 1))), np.full((2, 1), 3.0))

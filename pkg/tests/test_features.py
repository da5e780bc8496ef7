import numpy as np
import pytest

from mlrhash.errors import NumericalError, UsageError
from mlrhash.features import RbfMap, apply_rbf, fit_rbf


def test_fit_rbf_picks_distinct_training_anchors():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((4, 30))
    rbf = fit_rbf(v, 8, seed=5)

    assert rbf.anchors.shape == (4, 8)
    columns = {tuple(col) for col in v.T}
    anchors = {tuple(col) for col in rbf.anchors.T}
    assert len(anchors) == 8
    assert anchors <= columns
    assert rbf.sigma > 0

    again = fit_rbf(v, 8, seed=5)
    np.testing.assert_array_equal(rbf.anchors, again.anchors)
    assert rbf.sigma == again.sigma


def test_small_inputs_use_every_pair_for_the_width():
    v = np.array([[0.0, 3.0, 0.0], [0.0, 0.0, 4.0]])
    rbf = fit_rbf(v, 3, seed=1)
    distances = np.linalg.norm(v[:, :, None] - v[:, None, :], axis=0)
    assert rbf.sigma == pytest.approx(distances.mean())


def test_apply_rbf_values():
    rbf = RbfMap(anchors=np.array([[0.0, 1.0]]), sigma=1.0)
    mapped = apply_rbf(rbf, np.array([[0.0, 2.0]]))
    expected = np.exp(-np.array([[0.0, 4.0], [1.0, 1.0]]) / 2.0)
    np.testing.assert_allclose(mapped, expected)
    assert np.all(mapped > 0) and np.all(mapped <= 1)


def test_apply_rbf_keeps_far_points_positive():
    rbf = RbfMap(anchors=np.zeros((1, 1)), sigma=1e-3)
    mapped = apply_rbf(rbf, np.array([[1e3]]))
    assert mapped[0, 0] > 0


def test_fit_rbf_validates():
    v = np.ones((2, 4))
    with pytest.raises(UsageError):
        fit_rbf(v, 0, seed=0)
    with pytest.raises(UsageError):
        fit_rbf(v, 5, seed=0)
    with pytest.raises(NumericalError):
        fit_rbf(v, 2, seed=0)
    with pytest.raises(UsageError):
        apply_rbf(RbfMap(anchors=np.zeros((3, 1)), sigma=1.0), np.ones((2, 1)))

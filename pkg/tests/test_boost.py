import numpy as np
import pytest

from mlrhash.boost import (
    BoostEnsemble,
    BoostRun,
    assemble,
    balance_degree,
    bit_correlation,
    boost_train,
    finalize_model,
    read_provenance,
    select_rows,
    write_provenance,
)
from mlrhash.data import SyntheticSpec, gen_synthetic
from mlrhash.errors import UsageError
from mlrhash.trainer import Hyperparams, TrainReport, train


def _signs(rng, shape):
    return np.where(rng.standard_normal(shape) >= 0, 1.0, -1.0)


def _ensemble(rng, runs, bits, n, d, seeds=None):
    seeds = seeds if seeds is not None else list(range(runs))
    return BoostEnsemble(
        runs=[
            BoostRun(h=_signs(rng, (bits, n)), p=rng.standard_normal((d, bits)), seed=seed, report=TrainReport())
            for seed in seeds
        ]
    )


def test_balance_degree():
    assert balance_degree([1, -1, 1, -1]) == 0
    assert balance_degree([1, 1, 1, -1]) == 2
    assert balance_degree([-1, -1, -1]) == 3
    with pytest.raises(UsageError):
        balance_degree([1, 0])


def test_selected_rows_are_the_most_balanced():
    rng = np.random.default_rng(0)
    for _ in range(50):
        ensemble = _ensemble(rng, runs=3, bits=6, n=11, d=4)
        chosen = set(select_rows(ensemble, 6))
        degrees = {
            (t, l): balance_degree(run.h[l]) for t, run in enumerate(ensemble.runs) for l in range(6)
        }
        worst_selected = max(degrees[key] for key in chosen)
        best_unselected = min(degrees[key] for key in degrees if key not in chosen)
        assert worst_selected <= best_unselected


def test_selection_does_not_depend_on_run_order():
    rng = np.random.default_rng(1)
    ensemble = _ensemble(rng, runs=3, bits=4, n=6, d=2, seeds=[10, 11, 12])
    reordered = BoostEnsemble(runs=list(reversed(ensemble.runs)))

    picked = [(ensemble.runs[t].seed, l) for t, l in select_rows(ensemble, 4)]
    picked_again = [(reordered.runs[t].seed, l) for t, l in select_rows(reordered, 4)]
    assert picked == picked_again


def test_provenance_reconstructs_codes_and_projection(tmp_path):
    rng = np.random.default_rng(2)
    ensemble = _ensemble(rng, runs=3, bits=5, n=9, d=3)
    result = assemble(ensemble, 5)

    for k, (t, l) in enumerate(result.provenance):
        np.testing.assert_array_equal(result.h_f[k], ensemble.runs[t].h[l])
        np.testing.assert_array_equal(result.p_f[:, k], ensemble.runs[t].p[:, l])
    assert result.balance_degrees == sorted(result.balance_degrees)

    path = write_provenance(result, tmp_path / "model.prov")
    rows = read_provenance(path)
    assert [(t, l) for _, t, l, _ in rows] == result.provenance
    assert [k for k, _, _, _ in rows] == list(range(5))
    assert [degree for _, _, _, degree in rows] == result.balance_degrees


def test_ensemble_validation():
    rng = np.random.default_rng(3)
    with pytest.raises(UsageError):
        BoostEnsemble(runs=[])
    with pytest.raises(UsageError):
        _ensemble(rng, runs=2, bits=3, n=4, d=2, seeds=[5, 5])
    ensemble = _ensemble(rng, runs=2, bits=3, n=4, d=2)
    with pytest.raises(UsageError):
        select_rows(ensemble, 7)
    with pytest.raises(UsageError):
        select_rows(ensemble, 0)


def test_single_run_boost_matches_plain_training():
    ds = gen_synthetic(SyntheticSpec(num_classes=4, dim=8, per_class=20, seed=3))
    hp = Hyperparams(bits=12, seed=4, max_outer=8)
    model, _, _ = train(ds.features, ds.labels, hp)
    result, _ = boost_train(ds.features, ds.labels, hp, t=1)
    boosted = finalize_model(result, None, hp)

    sample = np.random.default_rng(5).standard_normal((8, 50))
    plain_codes = model.encode(sample)
    boosted_codes = boosted.encode(sample)
    assert sorted(l for _, l in result.provenance) == list(range(12))
    for k, (_, l) in enumerate(result.provenance):
        np.testing.assert_array_equal(boosted_codes[k], plain_codes[l])


def test_boost_is_deterministic_across_thread_counts():
    ds = gen_synthetic(SyntheticSpec(num_classes=3, dim=6, per_class=15, seed=0))
    hp = Hyperparams(bits=8, seed=1, max_outer=5)
    serial, ensemble = boost_train(ds.features, ds.labels, hp, t=3, threads=1)
    parallel, _ = boost_train(ds.features, ds.labels, hp, t=3, threads=3)

    assert [run.seed for run in ensemble.runs] == [1, 2, 3]
    assert serial.provenance == parallel.provenance
    np.testing.assert_array_equal(serial.h_f, parallel.h_f)
    np.testing.assert_array_equal(serial.p_f, parallel.p_f)
    assert serial.h_f.shape == (8, 45)
    assert serial.p_f.shape == (6, 8)


def test_boost_rejects_bad_run_counts():
    ds = gen_synthetic(SyntheticSpec(num_classes=2, dim=3, per_class=4, seed=0))
    with pytest.raises(UsageError):
        boost_train(ds.features, ds.labels, Hyperparams(bits=4), t=0)
    with pytest.raises(UsageError):
        boost_train(ds.features, ds.labels, Hyperparams(bits=4, seed=2**64 - 1), t=2)


def test_bit_correlation():
    assert bit_correlation(np.array([[1.0, -1.0, 1.0, -1.0], [1.0, -1.0, 1.0, -1.0]])) == pytest.approx(1.0)
    assert bit_correlation(np.array([[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]])) == pytest.approx(0.0)
    assert bit_correlation(np.ones((3, 4))) == 0.0
    assert bit_correlation(np.ones((1, 4))) == 0.0


def test_selection_hand_case():
    rows = {0: [1, -1, 1, -1], 2: [1, 1, 1, -1], 4: [1, 1, 1, 1]}
    degrees = [(0, 2, 4), (0, 2, 2), (4, 0, 2)]
    runs = [
        BoostRun(h=np.array([rows[d] for d in run], dtype=float), p=np.eye(3), seed=t, report=TrainReport())
        for t, run in enumerate(degrees)
    ]
    ensemble = BoostEnsemble(runs=runs)
    assert select_rows(ensemble, 3) == [(0, 0), (1, 0), (2, 1)]

    balanced = BoostEnsemble(
        runs=[BoostRun(h=np.array([rows[0]] * 3, dtype=float), p=np.eye(3), seed=t, report=TrainReport()) for t in range(2)]
    )
    assert select_rows(balanced, 3) == [(0, 0), (0, 1), (0, 2)]

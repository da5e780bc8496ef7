import numpy as np
import pytest

from mlrhash.errors import UsageError
from mlrhash.index import PackedCodes, distances, hamming, knn, pack, rank_all, unpack, words_per_code


def _signs(rng, shape):
    return np.where(rng.standard_normal(shape) >= 0, 1.0, -1.0)


def _naive_hamming(a, b):
    return int(np.count_nonzero(a != b))


def test_words_per_code():
    assert [words_per_code(bits) for bits in (1, 63, 64, 65, 128, 129)] == [1, 1, 1, 2, 2, 3]


def test_pack_bit_layout_and_padding():
    h = -np.ones((70, 1))
    h[0, 0] = 1.0
    h[63, 0] = 1.0
    h[64, 0] = 1.0
    codes = pack(h)

    assert codes.words.dtype == np.uint64
    assert codes.words.shape == (1, 2)
    assert int(codes.words[0, 0]) == (1 << 63) | 1
    assert int(codes.words[0, 1]) == 1
    np.testing.assert_array_equal(unpack(codes), h)


@pytest.mark.parametrize("bits", [1, 12, 64, 100])
def test_hamming_matches_naive_count(bits):
    rng = np.random.default_rng(bits)
    h = _signs(rng, (bits, 300))
    codes = pack(h)
    for _ in range(500):
        i, j = (int(value) for value in rng.integers(0, 300, size=2))
        assert hamming(codes, i, j) == _naive_hamming(h[:, i], h[:, j])


def test_hamming_metric_properties():
    rng = np.random.default_rng(0)
    codes = pack(_signs(rng, (48, 200)))
    for _ in range(1000):
        i, j, k = (int(value) for value in rng.integers(0, 200, size=3))
        assert hamming(codes, i, i) == 0
        assert hamming(codes, i, j) == hamming(codes, j, i)
        assert hamming(codes, i, k) <= hamming(codes, i, j) + hamming(codes, j, k)
        assert 0 <= hamming(codes, i, j) <= 48


def test_knn_matches_full_sort_with_index_tie_break():
    rng = np.random.default_rng(1)
    db_h = _signs(rng, (8, 1000))
    db = pack(db_h)
    query_h = _signs(rng, (8, 100))
    queries = pack(query_h)

    for q in range(100):
        naive = sorted((_naive_hamming(db_h[:, i], query_h[:, q]), i) for i in range(1000))
        expected = [(index, dist) for dist, index in naive[:25]]
        assert knn(db, queries.code(q), 25) == expected


def test_rank_all_agrees_with_distances():
    rng = np.random.default_rng(2)
    db = pack(_signs(rng, (20, 60)))
    queries = pack(_signs(rng, (20, 5)))
    order, dist = rank_all(db, queries)

    assert order.shape == (5, 60)
    for q in range(5):
        row = distances(db, queries.code(q))
        np.testing.assert_array_equal(dist[q], row[order[q]])
        assert np.all(np.diff(dist[q]) >= 0)
        assert sorted(order[q].tolist()) == list(range(60))


def test_knn_of_identical_codes_orders_by_index():
    codes = pack(np.ones((3, 4)))
    assert knn(codes, codes.code(0), 4) == [(0, 0), (1, 0), (2, 0), (3, 0)]


def test_index_errors():
    codes = pack(np.ones((3, 4)))
    with pytest.raises(UsageError):
        knn(codes, codes.code(0), 0)
    with pytest.raises(UsageError):
        knn(codes, codes.code(0), 5)
    with pytest.raises(UsageError):
        hamming(codes, 0, 4)
    with pytest.raises(UsageError):
        distances(codes, pack(np.ones((4, 1))))
    with pytest.raises(UsageError):
        pack(np.zeros((2, 2)))
    with pytest.raises(UsageError):
        PackedCodes(bits=65, words=np.zeros((1, 1), dtype=np.uint64))


def test_pack_hand_cases():
    assert int(pack(np.array([[1.0], [-1.0], [1.0], [1.0]])).words[0, 0]) == 0b1101
    assert int(pack(np.ones((64, 1))).words[0, 0]) == 0xFFFF_FFFF_FFFF_FFFF

    h = np.array([[1.0, -1.0], [-1.0, 1.0], [1.0, -1.0]])
    assert hamming(pack(h), 0, 1) == 3

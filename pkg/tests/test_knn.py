import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from medguard.detectors import DetectorError
from medguard.detectors.knn import KnnModel, knn_fit, knn_neighbors, knn_score


def brute_neighbors(X, q, k):
    d = np.sqrt(((X - q) ** 2).sum(axis=1))
    return np.lexsort((np.arange(X.shape[0]), d))[:k]


def test_identical_query_k1():
    X = np.array([[0.0, 0.0], [5.0, 5.0]])
    m = knn_fit(X, [0, 1], k=1)
    assert knn_score(m, [[5.0, 5.0], [0.0, 0.0]]).tolist() == [1.0, 0.0]


def test_vote_fraction():
    X = np.array([[1.0], [2.0], [3.0], [4.0], [5.0], [100.0]])
    m = knn_fit(X, [1, 1, 1, 0, 0, 0], k=5)
    s = knn_score(m, [[0.0]])
    assert s[0] == pytest.approx(0.6) and s[0] >= 0.5


def test_equidistant_lower_index_wins():
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    m = knn_fit(X, [0, 1, 1, 1], k=1)
    for _ in range(3):
        assert knn_neighbors(m, [[0.0, 0.0]]).tolist() == [[0]]
        assert knn_score(m, [[0.0, 0.0]]).tolist() == [0.0]


def test_boundary_tie_with_many_duplicates():
    # 30 identical points: the neighbour set must be the 3 lowest indices
    X = np.zeros((30, 2))
    X[:5] = 9.0
    m = knn_fit(X, np.r_[np.zeros(5), np.zeros(10), np.ones(15)].astype(int), k=3)
    assert knn_neighbors(m, [[0.0, 0.0]]).tolist() == [[5, 6, 7]]


@given(st.integers(0, 2**31), st.integers(1, 7))
@settings(max_examples=40, deadline=None)
def test_matches_brute_force_with_ties(seed, k):
    r = np.random.default_rng(seed)
    X = r.integers(0, 4, size=(60, 2)).astype(float)   # coarse grid forces ties
    Q = r.integers(0, 4, size=(15, 2)).astype(float)
    m = knn_fit(X, r.integers(0, 2, 60), k=k)
    got = knn_neighbors(m, Q)
    for i, q in enumerate(Q):
        assert got[i].tolist() == brute_neighbors(X, q, k).tolist()


def test_k_larger_than_training_set():
    with pytest.raises(DetectorError):
        knn_fit(np.zeros((3, 1)), [0, 1, 0], k=4)
    with pytest.raises(DetectorError):
        knn_fit(np.zeros((3, 1)), [0, 1, 0], k=1, distance="manhattan")


def test_label_swap_flips_flags():
    r = np.random.default_rng(2)
    X = r.normal(size=(200, 2))
    y = (X[:, 0] > 0).astype(int)
    Q = r.normal(size=(50, 2))
    a = knn_score(knn_fit(X, y, 5), Q) >= 0.5
    b = knn_score(knn_fit(X, 1 - y, 5), Q) >= 0.5
    assert np.array_equal(a, ~b)


def test_round_trip_dict():
    r = np.random.default_rng(4)
    m = knn_fit(r.normal(size=(40, 3)), r.integers(0, 2, 40), 3)
    back = KnnModel.from_dict(m.to_dict())
    Q = r.normal(size=(10, 3))
    assert np.array_equal(knn_score(back, Q), knn_score(m, Q))


def test_worker_count_does_not_change_results(monkeypatch):
    r = np.random.default_rng(5)
    X = r.integers(0, 3, size=(500, 2)).astype(float)
    m = knn_fit(X, r.integers(0, 2, 500), 5)
    Q = r.integers(0, 3, size=(200, 2)).astype(float)
    monkeypatch.setenv("SHIELD_THREADS", "1")
    one = knn_neighbors(m, Q)
    monkeypatch.setenv("SHIELD_THREADS", "4")
    assert np.array_equal(knn_neighbors(m, Q), one)

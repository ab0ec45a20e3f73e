import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from medguard.detectors.iforest import (EULER_GAMMA, IsoForestModel, build_itree, c_factor, harmonic,
                                        isoforest_fit, isoforest_score)
from medguard.detectors.thresholds import quota_flags
from medguard.rng import Rng


def test_c_factor_small_cases():
    assert c_factor(2) == 1.0
    assert c_factor(1) == 0.0 and c_factor(0) == 0.0
    assert harmonic(1) == 1.0


@given(st.integers(3, 10**6))
def test_c_factor_formula(n):
    h = math.log(n - 1) + EULER_GAMMA
    assert c_factor(n) == pytest.approx(2 * h - 2 * (n - 1) / n, rel=1e-12)


def test_average_depth_gives_half():
    assert 2 ** (-c_factor(256) / c_factor(256)) == 0.5


def test_tree_structure_respects_limits():
    X = np.random.default_rng(0).normal(size=(256, 3))
    t = build_itree(X, 8, Rng(1))
    assert t.depth.max() <= 8
    leaves = t.feature == -1
    assert t.size[leaves].sum() == 256
    inner = np.flatnonzero(~leaves)
    assert np.all(t.size[inner] == t.size[t.left[inner]] + t.size[t.right[inner]])


def naive_path(t, x, node=0):
    if t.feature[node] < 0:
        return t.depth[node] + c_factor(t.size[node])
    nxt = t.left[node] if x[t.feature[node]] < t.threshold[node] else t.right[node]
    return naive_path(t, x, nxt)


def test_path_length_matches_recursion():
    r = np.random.default_rng(2)
    X = r.normal(size=(128, 2))
    t = build_itree(X, 7, Rng(3))
    Q = r.normal(size=(50, 2)) * 2
    assert np.allclose(t.path_length(Q), [naive_path(t, q) for q in Q])


def test_outliers_score_above_inlier_median():
    ok = 0
    for seed in range(20):
        r = np.random.default_rng(seed)
        inl = r.normal(size=(950, 2))
        ang = r.uniform(0, 2 * np.pi, 50)
        out = 10 * np.column_stack([np.cos(ang), np.sin(ang)])
        X = np.vstack([inl, out])
        s = isoforest_score(isoforest_fit(X, 100, 256, 0.05, seed), X)
        ok += np.all(s[950:] > np.median(s[:950]))
    assert ok >= 19


def test_scores_bounded_and_monotone_in_depth():
    X = np.random.default_rng(4).normal(size=(300, 2))
    m = isoforest_fit(X, 50, 64, 0.1, 0)
    s = isoforest_score(m, X)
    assert np.all((s > 0) & (s < 1))
    eh = np.mean([t.path_length(X) for t in m.trees], axis=0)
    order = np.argsort(eh)
    assert np.all(np.diff(s[order]) <= 0)


def test_subsample_clipped_and_deterministic():
    X = np.random.default_rng(5).normal(size=(40, 2))
    m = isoforest_fit(X, 10, 256, 0.1, 9)
    assert m.subsample == 40
    assert np.array_equal(isoforest_score(isoforest_fit(X, 10, 256, 0.1, 9), X), isoforest_score(m, X))
    back = IsoForestModel.from_dict(m.to_dict())
    assert np.array_equal(isoforest_score(back, X), isoforest_score(m, X))


@pytest.mark.parametrize("n", [10, 97, 1000, 1003])
def test_quota_exact(n):
    s = np.random.default_rng(n).random(n)
    flags, _ = quota_flags(s, 0.2)
    assert flags.sum() == math.floor(0.2 * n + 0.5)


def test_quota_ties_go_to_lower_index():
    flags, thr = quota_flags([1.0, 5.0, 5.0, 5.0, 0.0], 0.4)
    assert flags.tolist() == [0, 1, 1, 0, 0] and thr == 5.0

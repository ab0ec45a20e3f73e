"""Exact k-nearest-neighbour vote with deterministic tie-breaking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..parallel import worker_count
from .base import DetectorError, check_binary


@dataclass
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    distance: str = "euclidean"
    _tree: cKDTree = None

    def __post_init__(self):
        if self.distance != "euclidean":
            raise DetectorError(f"unsupported distance {self.distance!r}")
        if not 1 <= self.k <= self.X.shape[0]:
            raise DetectorError(f"k={self.k} must lie in [1, n_train={self.X.shape[0]}]")

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            # sliding-midpoint splits cope far better with duplicated rows than median splits
            self._tree = cKDTree(self.X, balanced_tree=False)
        return self._tree

    def to_dict(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y.tolist(), "k": self.k, "distance": self.distance}

    @classmethod
    def from_dict(cls, d: dict) -> "KnnModel":
        X = np.array(d["X"], dtype=np.float64).reshape(len(d["y"]), -1)
        return cls(X, np.array(d["y"], dtype=np.int64), int(d["k"]), d["distance"])


def knn_fit(X, y, k: int = 5, distance: str = "euclidean") -> KnnModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = check_binary(y)
    if X.shape[0] != y.size:
        raise DetectorError("X and y have different row counts")
    return KnnModel(X, y, int(k), distance)


def _exact_dist(X, rows, q):
    diff = X[rows] - q
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def knn_neighbors(model: KnnModel, Q) -> np.ndarray:
    """Indices of the k nearest training rows for each query, nearest first.

    Equal distances are ordered by training-row index.  The KD-tree gives the
    candidate set; any query whose k-th distance is tied with a row outside
    the candidate set is resolved by an exact radius search.
    """
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    n, k = model.X.shape[0], model.k
    kq = min(k + 1, n)
    dist, idx = model.tree.query(Q, k=kq, workers=worker_count())
    dist = dist.reshape(Q.shape[0], kq)
    idx = idx.reshape(Q.shape[0], kq)
    # only a tie straddling the k-th / (k+1)-th position can change the neighbour set
    boundary = np.zeros(Q.shape[0], dtype=bool)
    if kq > k:
        boundary = dist[:, k] - dist[:, k - 1] <= 1e-12 * np.maximum(dist[:, k], 1.0)
    d, i = dist[:, :k], idx[:, :k]
    # sort by index, then stably by distance: equal distances stay in index order
    by_index = np.argsort(i, axis=1, kind="stable")
    d, i = np.take_along_axis(d, by_index, axis=1), np.take_along_axis(i, by_index, axis=1)
    out = np.take_along_axis(i, np.argsort(d, axis=1, kind="stable"), axis=1)
    for r in np.flatnonzero(boundary):
        q = Q[r]
        radius = dist[r, k - 1]
        cand = np.asarray(model.tree.query_ball_point(q, radius * (1 + 1e-9) + 1e-12), dtype=np.int64)
        cand = np.union1d(cand, idx[r, :k])
        d = _exact_dist(model.X, cand, q)
        order = np.lexsort((cand, d))
        out[r] = cand[order[:k]]
    return out


def knn_score(model: KnnModel, Q) -> np.ndarray:
    """Fraction of anomalous labels among the k nearest training rows."""
    nb = knn_neighbors(model, Q)
    return model.y[nb].sum(axis=1) / model.k

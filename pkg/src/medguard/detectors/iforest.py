"""Isolation Forest: random axis-parallel partitioning and expected path length."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..rng import Rng
from .base import DetectorError

EULER_GAMMA = 0.5772156649


def harmonic(i):
    """Asymptotic harmonic number ``ln(i) + gamma``; exact ``H(1) = 1``."""
    i = np.asarray(i, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(i == 1, 1.0, np.log(i) + EULER_GAMMA)


def c_factor(n):
    """Average unsuccessful-search path length in a BST of ``n`` points."""
    n = np.asarray(n, dtype=np.float64)
    safe = np.maximum(n, 2.0)
    c = 2.0 * harmonic(safe - 1) - 2.0 * (safe - 1) / safe
    out = np.where(n <= 1, 0.0, np.where(n == 2, 1.0, c))
    return out if out.ndim else float(out)


@dataclass
class ITree:
    feature: np.ndarray      # -1 for an external node
    threshold: np.ndarray    # go left when x < threshold
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray         # training points that reached the node
    depth: np.ndarray

    def path_length(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            r, nd = rows[inner], node[inner]
            go_left = X[r, f[inner]] < self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
        return self.depth[node] + c_factor(self.size[node])

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "size", "depth")}

    @classmethod
    def from_dict(cls, d: dict) -> "ITree":
        return cls(*(np.array(d[k], dtype=np.float64 if k == "threshold" else np.int64)
                     for k in ("feature", "threshold", "left", "right", "size", "depth")))


def build_itree(X: np.ndarray, height_limit: int, rng: Rng) -> ITree:
    """Grow one tree depth-first.  A node stops splitting at the height limit,
    at one point, or when all of its points coincide."""
    feature, threshold, left, right, size, depth = [], [], [], [], [], []

    def new_node(n, dep):
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (size, n), (depth, dep)):
            lst.append(v)
        return len(feature) - 1

    stack = [(np.arange(X.shape[0]), new_node(X.shape[0], 0))]
    while stack:
        rows, nd = stack.pop()
        if depth[nd] >= height_limit or rows.size <= 1:
            continue
        sub = X[rows]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        live = np.flatnonzero(hi > lo)
        if live.size == 0:
            continue
        f = int(live[rng.integers(1, live.size)[0]])
        thr = float(rng.uniform(1, lo[f], hi[f])[0])
        if thr <= lo[f]:          # keep both sides non-empty
            thr = float(np.nextafter(lo[f], hi[f]))
        go_left = sub[:, f] < thr
        li = new_node(int(go_left.sum()), depth[nd] + 1)
        ri = new_node(int((~go_left).sum()), depth[nd] + 1)
        feature[nd], threshold[nd], left[nd], right[nd] = f, thr, li, ri
        stack.append((rows[~go_left], ri))
        stack.append((rows[go_left], li))
    return ITree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                 np.array(size), np.array(depth))


@dataclass
class IsoForestModel:
    trees: list
    subsample: int
    contamination: float

    @property
    def height_limit(self) -> int:
        return math.ceil(math.log2(self.subsample)) if self.subsample > 1 else 0

    def to_dict(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees], "subsample": self.subsample,
                "contamination": self.contamination}

    @classmethod
    def from_dict(cls, d: dict) -> "IsoForestModel":
        return cls([ITree.from_dict(t) for t in d["trees"]], int(d["subsample"]), float(d["contamination"]))


def isoforest_fit(X, n_trees: int = 100, subsample: int = 256, contamination: float = 0.1,
                  seed: int = 0) -> IsoForestModel:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise DetectorError("isolation forest needs at least one training row")
    if not 0.0 <= contamination <= 0.5:
        raise DetectorError("contamination must lie in [0, 0.5]")
    psi = min(int(subsample), n)
    model = IsoForestModel([], psi, float(contamination))
    root = Rng(seed).child(0x1F)
    for t in range(int(n_trees)):
        rng = root.child(t)
        rows = np.sort(rng.choice(n, psi))
        model.trees.append(build_itree(X[rows], model.height_limit, rng))
    return model


def isoforest_score(model: IsoForestModel, X) -> np.ndarray:
    """``2 ** (-E[h(x)] / c(psi))``; values near 1 are easy to isolate."""
    X = np.asarray(X, dtype=np.float64)
    total = np.zeros(X.shape[0])
    for t in model.trees:
        total += t.path_length(X)
    mean_h = total / len(model.trees)
    cpsi = c_factor(model.subsample)
    if cpsi == 0:
        return np.full(X.shape[0], 0.5)
    return 2.0 ** (-mean_h / cpsi)

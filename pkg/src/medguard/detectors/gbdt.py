"""Gradient-boosted regression trees on the logistic loss (second-order splits)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .base import DetectorError, check_binary


# gains within this relative distance count as equal when picking a split
TIE_RTOL = 1e-12


def leaf_weight(G, H, lam):
    return -G / (H + lam)


def split_gain(GL, HL, GR, HR, lam):
    """Loss reduction of splitting a node into (L, R)."""
    return 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - (GL + GR) ** 2 / (HL + HR + lam))


def logloss(y, p) -> float:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


@dataclass
class Tree:
    feature: np.ndarray      # -1 marks a leaf
    threshold: np.ndarray    # go left when x < threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray        # leaf weight (0 for internal nodes)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, n_, fi = rows[inner], node[inner], f[inner]
            go_left = X[r, fi] < self.threshold[n_]
            node[r] = np.where(go_left, self.left[n_], self.right[n_])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        d = np.zeros(self.feature.size, dtype=np.int64)
        for i in range(self.feature.size):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
        return int(d.max())

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=np.float64))


@dataclass
class GbdtModel:
    trees: list
    base_score: float
    learning_rate: float
    max_depth: int
    reg_lambda: float
    train_loss: list = field(default_factory=list)

    def margin(self, X: np.ndarray) -> np.ndarray:
        m = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            m += self.learning_rate * t.predict(X)
        return m

    def to_dict(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees], "base_score": self.base_score,
                "learning_rate": self.learning_rate, "max_depth": self.max_depth,
                "reg_lambda": self.reg_lambda, "train_loss": list(self.train_loss)}

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        return cls([Tree.from_dict(t) for t in d["trees"]], d["base_score"], d["learning_rate"],
                   d["max_depth"], d["reg_lambda"], d.get("train_loss", []))


def _best_splits(order, sorted_x, g, h, slot, n_slots, lam):
    """Best (gain, feature, threshold) for every open node of one tree level.

    ``slot[i]`` is the level-local index of row i's node, or -1 when the row
    sits in a finished leaf.  Features are scanned in column order and only a
    gain larger by more than rounding noise replaces the incumbent, so ties
    go to the lowest feature index and then the lowest threshold whatever
    order the prefix sums were accumulated in.
    """
    best_gain = np.zeros(n_slots)
    best_feat = np.full(n_slots, -1, dtype=np.int64)
    best_thr = np.zeros(n_slots)
    sdtype = np.int16 if n_slots < 32000 else np.int32
    n_closed = int(np.count_nonzero(slot < 0))
    for f in range(order.shape[0]):
        s_sorted = slot[order[f]].astype(sdtype)
        # stable radix sort groups rows by node and keeps value order inside each node;
        # closed rows (slot -1) come first and are sliced away
        perm = np.argsort(s_sorted, kind="stable")[n_closed:]
        if perm.size < 2:
            continue
        o = order[f][perm]
        s = s_sorted[perm]
        xs = sorted_x[f][perm]
        cg = np.cumsum(g[o])
        ch = np.cumsum(h[o])
        brk = np.flatnonzero(s[1:] != s[:-1]) + 1
        seg_start = np.concatenate([[0], brk])
        seg_len = np.diff(np.concatenate([seg_start, [s.size]]))
        seg_of = np.repeat(np.arange(seg_start.size), seg_len)
        cg0 = np.concatenate([[0.0], cg])
        ch0 = np.concatenate([[0.0], ch])
        g_before = cg0[seg_start]
        h_before = ch0[seg_start]
        GL = cg - g_before[seg_of]
        HL = ch - h_before[seg_of]
        Gt = (cg0[seg_start + seg_len] - g_before)[seg_of]
        Ht = (ch0[seg_start + seg_len] - h_before)[seg_of]
        gain = split_gain(GL, HL, Gt - GL, Ht - HL, lam)
        # a cut after position i needs a next row in the same node with a larger value
        ok = np.zeros(s.size, dtype=bool)
        ok[:-1] = xs[1:] > xs[:-1]
        ok[brk - 1] = False
        gain[~ok] = -np.inf
        seg_max = np.maximum.reduceat(gain, seg_start)
        slots = s[seg_start].astype(np.int64)
        better = seg_max > best_gain[slots] * (1.0 + TIE_RTOL)
        if not better.any():
            continue
        cand = np.flatnonzero(gain >= seg_max[seg_of] * (1.0 - TIE_RTOL))
        segs, first = np.unique(seg_of[cand], return_index=True)
        pos_of_seg = np.full(seg_start.size, -1, dtype=np.int64)
        pos_of_seg[segs] = cand[first]
        pos = pos_of_seg[better]
        slots = slots[better]
        best_gain[slots] = gain[pos]
        best_feat[slots] = f
        a, b = xs[pos], xs[pos + 1]
        thr = a + (b - a) / 2
        best_thr[slots] = np.where(thr > a, thr, b)
    return best_gain, best_feat, best_thr


def _grow_tree(X, order, sorted_x, g, h, max_depth, lam):
    n = X.shape[0]
    feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0.0]
    node_of = np.zeros(n, dtype=np.int64)
    open_nodes = [0]
    for _ in range(max_depth):
        if not open_nodes:
            break
        slot_of_node = {nd: k for k, nd in enumerate(open_nodes)}
        lookup = np.full(len(feature), -1, dtype=np.int64)
        for nd, k in slot_of_node.items():
            lookup[nd] = k
        slot = lookup[node_of]
        gain, feat, thr = _best_splits(order, sorted_x, g, h, slot, len(open_nodes), lam)
        next_open = []
        child_map = np.full(len(open_nodes), -1, dtype=np.int64)
        for k, nd in enumerate(open_nodes):
            if feat[k] < 0 or gain[k] <= 0:
                continue
            feature[nd], threshold[nd] = int(feat[k]), float(thr[k])
            li = len(feature)
            for _ in range(2):
                feature.append(-1), threshold.append(0.0), left.append(-1), right.append(-1), value.append(0.0)
            left[nd], right[nd] = li, li + 1
            next_open += [li, li + 1]
            child_map[k] = li
        moving = slot >= 0
        moving &= child_map[np.where(slot >= 0, slot, 0)] >= 0
        r = np.flatnonzero(moving)
        k = slot[r]
        go_left = X[r, feat[k]] < thr[k]
        node_of[r] = np.where(go_left, child_map[k], child_map[k] + 1)
        open_nodes = next_open
    G = np.bincount(node_of, weights=g, minlength=len(feature))
    H = np.bincount(node_of, weights=h, minlength=len(feature))
    feature = np.array(feature, dtype=np.int64)
    val = np.where(feature < 0, leaf_weight(G, H, lam), 0.0)
    tree = Tree(feature, np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), val)
    return tree, node_of


def gbdt_fit(X: np.ndarray, y, learning_rate=0.1, max_depth=6, n_rounds=100,
             reg_lambda=1.0) -> GbdtModel:
    """Fit ``n_rounds`` trees to logistic-loss gradients ``p - y`` and hessians ``p(1-p)``."""
    X = np.asarray(X, dtype=np.float64)
    y = check_binary(y).astype(np.float64)
    if max_depth < 1:
        raise DetectorError("max_depth must be >= 1")
    prior = y.mean()
    base = float(np.log(prior / (1 - prior)))
    order = np.argsort(X, axis=0, kind="stable").T.copy()
    sorted_x = np.take_along_axis(X.T, order, axis=1)
    margin = np.full(y.size, base)
    model = GbdtModel([], base, learning_rate, max_depth, reg_lambda)
    p = expit(margin)
    model.train_loss.append(logloss(y, p))
    for _ in range(n_rounds):
        g = p - y
        h = p * (1 - p)
        tree, leaf_of = _grow_tree(X, order, sorted_x, g, h, max_depth, reg_lambda)
        model.trees.append(tree)
        margin += learning_rate * tree.value[leaf_of]
        p = expit(margin)
        model.train_loss.append(logloss(y, p))
    return model


def gbdt_score(model: GbdtModel, X: np.ndarray) -> np.ndarray:
    """Probability of the anomalous class."""
    return expit(model.margin(np.asarray(X, dtype=np.float64)))

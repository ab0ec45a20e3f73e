"""Feature scoring (ANOVA F, mutual information, RFE) and union selection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .datamodel import FeatureMatrix

ANOVA_F = "ANOVA_F"
MUTUAL_INFO = "MUTUAL_INFO"
RFE_RANK = "RFE_RANK"
METHODS = (ANOVA_F, MUTUAL_INFO, RFE_RANK)

# Per-method top-k.  The cyber value lands the union at 28 columns on the
# bundled generator; the device value keeps three features per method.
DEFAULT_TOP_K = {"device": 3, "cyber": 22}


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureScoreTable:
    """Per-feature scores from one method; ``selected`` marks the method's own pick."""

    method: str
    features: tuple
    scores: np.ndarray
    selected: np.ndarray

    def __post_init__(self):
        if len(self.features) != len(self.scores) or len(self.scores) != len(self.selected):
            raise ValueError("features, scores and selected must have equal length")
        if np.isnan(self.scores).any() or np.isneginf(self.scores).any():
            raise ValueError("scores must be finite or +inf")

    def score(self, name: str) -> float:
        return float(self.scores[self.features.index(name)])

    def ranking(self) -> list:
        """Feature names, best first; ties keep column order (+inf ranks above all)."""
        order = sorted(range(len(self.features)), key=lambda j: (-self.scores[j], j))
        return [self.features[j] for j in order]

    def top(self, k: int) -> list:
        return self.ranking()[:k]

    def with_selection(self, names) -> "FeatureScoreTable":
        names = set(names)
        sel = np.array([f in names for f in self.features])
        return FeatureScoreTable(self.method, self.features, self.scores, sel)


def _binary_labels(y) -> np.ndarray:
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size != 2:
        raise SelectionError(f"need exactly two classes, got {classes.tolist()}")
    return (y == classes[1]).astype(np.int64)


def anova_f(X: FeatureMatrix, y) -> FeatureScoreTable:
    """One-way ANOVA F statistic of each feature against the class label.

    A feature with zero within-group variance scores ``+inf`` when the group
    means differ and ``0`` when they coincide.
    """
    y = np.asarray(y)
    groups = np.unique(y)
    if groups.size < 2:
        raise SelectionError("anova_f needs at least two classes")
    # one contiguous row per feature: each score is reduced on its own, so
    # reordering the columns cannot change the summation order
    xt = np.ascontiguousarray(X.values.T)
    d, n, g = xt.shape[0], xt.shape[1], groups.size
    if n < 3 or n <= g:
        raise SelectionError("anova_f needs at least 3 rows and more rows than groups")
    grand = xt.mean(axis=1)
    # rounding-level tolerance for "equal means" and "zero spread"
    tol = 8 * np.finfo(np.float64).eps * np.maximum(np.abs(xt).max(axis=1), 1e-300)
    ss_between = np.zeros(d)
    ss_within = np.zeros(d)
    mean_gap = np.zeros(d)
    spread = np.zeros(d)
    for c in groups:
        xg = np.ascontiguousarray(xt[:, y == c])
        mu = xg.mean(axis=1)
        dev = xg - mu[:, None]
        ss_between += xg.shape[1] * (mu - grand) ** 2
        ss_within += (dev ** 2).sum(axis=1)
        mean_gap = np.maximum(mean_gap, np.abs(mu - grand))
        spread = np.maximum(spread, np.abs(dev).max(axis=1))
    equal_means = mean_gap <= tol
    no_spread = spread <= tol
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (ss_between / (g - 1)) / (ss_within / (n - g))
    f = np.where(equal_means, 0.0, np.where(no_spread, np.inf, f))
    return FeatureScoreTable(ANOVA_F, X.column_names, f, np.zeros(d, dtype=bool))


def equal_frequency_bins(x, bins: int) -> np.ndarray:
    """Bin index of each value: ``floor(r * bins / n)`` where ``r`` is the rank of the
    first occurrence of the value in sorted order, so equal values share a bin."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    order = np.argsort(x, kind="stable")
    sx = x[order]
    first = np.empty(n, dtype=np.int64)
    if n:
        new = np.concatenate([[True], sx[1:] != sx[:-1]])
        starts = np.flatnonzero(new)
        first_sorted = starts[np.cumsum(new) - 1]
        first[order] = first_sorted
    return first * bins // max(n, 1)


def _mi_discrete(a: np.ndarray, b: np.ndarray) -> float:
    n = a.size
    table = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(table, (a, b), 1.0)
    pab = table / n
    pa = pab.sum(axis=1, keepdims=True)
    pb = pab.sum(axis=0, keepdims=True)
    nz = pab > 0
    return float(np.sum(pab[nz] * np.log(pab[nz] / (pa @ pb)[nz])))


def mutual_info(X: FeatureMatrix, y, bins: int = 10) -> FeatureScoreTable:
    """Plug-in mutual information (nats) between equal-frequency-binned features and y."""
    if bins < 2:
        raise SelectionError("bins must be >= 2")
    _, yc = np.unique(np.asarray(y), return_inverse=True)
    scores = np.array([
        max(_mi_discrete(equal_frequency_bins(X.values[:, j], bins), yc), 0.0)
        for j in range(X.n_cols)
    ])
    return FeatureScoreTable(MUTUAL_INFO, X.column_names, scores, np.zeros(X.n_cols, dtype=bool))


def fit_logistic(x: np.ndarray, y: np.ndarray, lam: float = 1.0, n_iter: int = 500,
                 step: float = 0.1):
    """L2-regularized logistic regression by full-batch gradient descent.

    Minimizes ``mean(logloss) + lam / (2 n) * ||w||^2``; the intercept is not
    penalized.  Returns ``(w, b)``.
    """
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(n_iter):
        p = expit(x @ w + b)
        r = p - y
        gw = x.T @ r / n + lam * w / n
        gb = r.mean()
        w -= step * gw
        b -= step * gb
    return w, b


def rfe_select(X: FeatureMatrix, y, k_target: int, lam: float = 1.0, n_iter: int = 500,
               step: float = 0.1, drop_fraction: float = 0.1) -> FeatureScoreTable:
    """Recursive feature elimination with a logistic-regression ranker.

    Each round refits on the surviving (standardized) features and drops the
    ``max(1, ceil(drop_fraction * remaining))`` features with the smallest
    ``|w|``.  The score of a feature is the round in which it was dropped
    (1-based); survivors share the final round number.
    """
    d = X.n_cols
    if k_target < 1 or k_target > d:
        raise SelectionError(f"k_target must lie in [1, {d}], got {k_target}")
    yb = _binary_labels(y).astype(np.float64)
    x = X.values
    std = x.std(axis=0)
    x = np.where(std > 0, (x - x.mean(axis=0)) / np.where(std > 0, std, 1.0), 0.0)
    alive = list(range(d))
    rounds = np.zeros(d)
    r = 0
    while len(alive) > k_target:
        r += 1
        w, _ = fit_logistic(x[:, alive], yb, lam, n_iter, step)
        n_drop = min(max(1, math.ceil(drop_fraction * len(alive))), len(alive) - k_target)
        # stable: among equal |w| the later column goes first
        order = sorted(range(len(alive)), key=lambda i: (abs(w[i]), -alive[i]))
        dropped = {alive[i] for i in order[:n_drop]}
        for j in dropped:
            rounds[j] = r
        alive = [j for j in alive if j not in dropped]
    for j in alive:
        rounds[j] = r + 1
    sel = np.zeros(d, dtype=bool)
    sel[alive] = True
    return FeatureScoreTable(RFE_RANK, X.column_names, rounds, sel)


def union_select(tables: Sequence[FeatureScoreTable], top_k_per_method) -> list:
    """Union of each table's top-k features, in original column order.

    ``top_k_per_method`` is one int for every method or a ``{method: k}`` dict.
    """
    if not tables:
        raise SelectionError("no score tables given")
    columns = tables[0].features
    chosen = set()
    for t in tables:
        if t.features != columns:
            raise SelectionError("score tables cover different feature sets")
        k = top_k_per_method.get(t.method, 0) if isinstance(top_k_per_method, dict) \
            else int(top_k_per_method)
        if k < 0:
            raise SelectionError("top-k must be non-negative")
        chosen.update(t.top(k))
    if not chosen:
        raise SelectionError("feature union is empty")
    return [c for c in columns if c in chosen]


def select_features(X: FeatureMatrix, y, top_k, bins: int = 10):
    """Run all three methods and the union.  Returns ``(tables, selected_names)``."""
    k = top_k if isinstance(top_k, dict) else {ANOVA_F: top_k, MUTUAL_INFO: top_k, RFE_RANK: top_k}
    tables = [anova_f(X, y), mutual_info(X, y, bins),
              rfe_select(X, y, max(1, min(k[RFE_RANK], X.n_cols)))]
    selected = union_select(tables, k)
    tables = [t.with_selection(t.top(k[t.method])) for t in tables]
    return tables, selected


def format_score(v: float) -> str:
    return "inf" if math.isinf(v) else repr(float(v))


def write_score_csv(tables: Sequence[FeatureScoreTable], path) -> None:
    """Columns: feature, method, score, selected.  ``+inf`` is written as ``inf``."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "method", "score", "selected"])
        for t in tables:
            for name, s, sel in zip(t.features, t.scores, t.selected):
                w.writerow([name, t.method, format_score(s), int(bool(sel))])


def read_score_csv(path) -> list:
    by_method: dict = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            by_method.setdefault(row["method"], []).append(row)
    out = []
    for method, rows in by_method.items():
        out.append(FeatureScoreTable(
            method, tuple(r["feature"] for r in rows),
            np.array([float(r["score"]) for r in rows]),
            np.array([r["selected"] == "1" for r in rows]),
        ))
    return out

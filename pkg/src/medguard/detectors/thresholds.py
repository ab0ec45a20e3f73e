"""Turning continuous anomaly scores into binary flags."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def nearest_rank_index(n: int, percentile: float) -> int:
    """1-based nearest-rank position ``max(1, ceil(p * n / 100))``, in exact arithmetic."""
    if n < 1:
        raise ValueError("need at least one score")
    if not 0 <= percentile <= 100:
        raise ValueError("percentile must lie in [0, 100]")
    return max(1, math.ceil(Fraction(percentile) * n / 100))


def percentile_threshold(scores, percentile: float) -> float:
    s = np.sort(np.asarray(scores, dtype=np.float64))
    return float(s[nearest_rank_index(s.size, percentile) - 1])


def threshold_flags(scores, percentile: float = 80.0):
    """Flag scores strictly above the nearest-rank percentile.  Returns ``(flags, threshold)``."""
    scores = np.asarray(scores, dtype=np.float64)
    thr = percentile_threshold(scores, percentile)
    return (scores > thr).astype(np.int64), thr


def quota_flags(scores, fraction: float):
    """Flag exactly ``floor(fraction * n + 1/2)`` highest scores; ties go to the lower row index.

    Returns ``(flags, threshold)`` where the threshold is the lowest flagged
    score (``+inf`` when nothing is flagged).
    """
    scores = np.asarray(scores, dtype=np.float64)
    q = math.floor(Fraction(fraction) * scores.size + Fraction(1, 2))
    order = np.lexsort((np.arange(scores.size), -scores))
    flags = np.zeros(scores.size, dtype=np.int64)
    flags[order[:q]] = 1
    thr = float(scores[order[q - 1]]) if q > 0 else math.inf
    return flags, thr

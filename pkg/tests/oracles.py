"""Independent reference computations shared by the unit and acceptance tests."""

import itertools

import numpy as np

from medguard.detectors.neural import init_params, loss_and_grads
from medguard.rng import Rng


def pairwise_auc(y, s):
    """Probability a random positive outscores a random negative (ties count half)."""
    pos = [b for a, b in zip(y, s) if a == 1]
    neg = [b for a, b in zip(y, s) if a == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p, q in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def brute_confusion(y, pred):
    tp = fp = fn = tn = 0
    for a, b in zip(y, pred):
        if a == 1 and b == 1:
            tp += 1
        elif a == 0 and b == 1:
            fp += 1
        elif a == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def gradient_check(kind, seed=0, dims=(6, 4, 2), rows=10, step=1e-5):
    """Max elementwise relative error between analytic and central-difference gradients."""
    d, hidden, latent = dims
    theta = init_params(kind, d, hidden, latent, Rng(seed))
    # larger weights than the training init so every layer carries signal
    theta = theta * 20 + Rng(seed + 1).uniform(theta.size, -0.1, 0.1)
    X = Rng(seed + 2).uniform(rows * d).reshape(rows, d)
    eps = Rng(seed + 3).normal(rows * latent).reshape(rows, latent) if kind == "VAE" else None
    _, grad = loss_and_grads(kind, theta, X, eps, dims)
    num = np.empty_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        num[i] = (loss_and_grads(kind, tp, X, eps, dims)[0] - loss_and_grads(kind, tm, X, eps, dims)[0]) / (2 * step)
    scale = np.maximum(np.abs(grad) + np.abs(num), 1e-8)
    return float(np.max(np.abs(grad - num) / scale))

"""One-class SVM (nu formulation) solved by pairwise coordinate descent.

The dual is::

    min 1/2 a^T K a   s.t.  0 <= a_i <= C = 1/(nu n),  sum(a) = 1

Each step picks a maximal-violating pair with second-order working-set
selection and moves mass between them analytically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .base import ConvergenceError, DetectorError

TAU = 1e-12


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    d2 = cdist(np.asarray(A, dtype=np.float64), np.asarray(B, dtype=np.float64), "sqeuclidean")
    return np.exp(-gamma * d2)


def scale_gamma(X) -> float:
    """``1 / (d * var(X))`` over all entries; 1.0 when X is constant."""
    X = np.asarray(X, dtype=np.float64)
    v = X.var()
    return 1.0 / (X.shape[1] * v) if v > 0 else 1.0


@dataclass
class OcsvmModel:
    support: np.ndarray     # support vectors (rows with a > 0)
    alpha: np.ndarray
    rho: float
    gamma: float
    nu: float
    n_train: int
    iterations: int = 0

    def decision(self, X) -> np.ndarray:
        """f(x) = sum_i a_i K(x_i, x) - rho; negative outside the learned region."""
        return rbf_kernel(X, self.support, self.gamma) @ self.alpha - self.rho

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "alpha": self.alpha.tolist(), "rho": self.rho,
                "gamma": self.gamma, "nu": self.nu, "n_train": self.n_train,
                "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d: dict) -> "OcsvmModel":
        alpha = np.array(d["alpha"], dtype=np.float64)
        support = np.array(d["support"], dtype=np.float64).reshape(alpha.size, -1)
        return cls(support, alpha, float(d["rho"]), float(d["gamma"]), float(d["nu"]),
                   int(d["n_train"]), int(d.get("iterations", 0)))


def solve_dual(K: np.ndarray, C: float, tol: float = 1e-6, max_iter: int = 200_000):
    """Return ``(alpha, rho, iterations)`` for the one-class dual with box ``C``."""
    n = K.shape[0]
    alpha = np.zeros(n)
    # feasible start: fill the first floor(1/C) coordinates to the bound
    n_full = min(int(np.floor(1.0 / C)), n)
    alpha[:n_full] = C
    if n_full < n:
        alpha[n_full] = 1.0 - C * n_full
    grad = K @ alpha
    diag = np.diag(K).copy()
    eps_a = 1e-12 * C
    for it in range(max_iter):
        up = alpha < C - eps_a
        low = alpha > eps_a
        neg = -grad
        m_val = np.max(np.where(up, neg, -np.inf))
        M_val = np.min(np.where(low, neg, np.inf))
        gap = m_val - M_val
        if gap < tol:
            break
        i = int(np.argmax(np.where(up, neg, -np.inf)))
        b = m_val + grad                       # = -G_i + G_t, positive for violators
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        cand = low & (b > 0)
        obj = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        step = b[j] / a[j]
        step = min(step, C - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (K[:, i] - K[:, j])
    else:
        raise ConvergenceError(f"OC-SVM did not converge in {max_iter} iterations", float(gap))
    free = (alpha > eps_a) & (alpha < C - eps_a)
    rho = float(grad[free].mean()) if free.any() else -float(m_val + M_val) / 2.0
    return alpha, rho, it


def ocsvm_fit(X, nu: float = 0.1, gamma=None, tol: float = 1e-6, max_iter: int = 200_000) -> OcsvmModel:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not 0.0 < nu <= 1.0:
        raise DetectorError("nu must lie in (0, 1]")
    if n < 2:
        raise DetectorError("OC-SVM needs at least two training rows")
    g = scale_gamma(X) if gamma is None else float(gamma)
    K = rbf_kernel(X, X, g)
    C = 1.0 / (nu * n)
    alpha, rho, iters = solve_dual(K, C, tol, max_iter)
    sv = alpha > 0
    return OcsvmModel(X[sv].copy(), alpha[sv].copy(), rho, g, float(nu), n, iters)


def ocsvm_score(model: OcsvmModel, X) -> np.ndarray:
    """``-f(x) = rho - sum_i a_i K(x_i, x)``; positive means outside the support."""
    return -model.decision(np.asarray(X, dtype=np.float64))

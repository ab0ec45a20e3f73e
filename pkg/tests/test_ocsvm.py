import numpy as np
import pytest

from medguard.detectors import ConvergenceError, DetectorError
from medguard.detectors.ocsvm import OcsvmModel, ocsvm_fit, ocsvm_score, rbf_kernel, scale_gamma, solve_dual


def test_kernel_diagonal_is_one():
    X = np.random.default_rng(0).normal(size=(20, 4)) * 100
    assert np.all(np.diag(rbf_kernel(X, X, 0.7)) == 1.0)


def test_kernel_value():
    assert rbf_kernel([[0.0, 0.0]], [[1.0, 2.0]], 0.5)[0, 0] == pytest.approx(np.exp(-2.5), rel=1e-15)


@pytest.mark.parametrize("nu", [0.1, 0.2, 0.5])
def test_nu_property(nu):
    X = np.random.default_rng(1).normal(size=(400, 2))
    m = ocsvm_fit(X, nu=nu, gamma=0.5)
    assert (ocsvm_score(m, X) > 0).mean() <= nu + 0.02
    assert m.alpha.size / m.n_train >= nu - 0.02


def test_dual_feasibility_and_kkt():
    X = np.random.default_rng(2).normal(size=(150, 3))
    K = rbf_kernel(X, X, 0.3)
    C = 1 / (0.2 * 150)
    alpha, rho, _ = solve_dual(K, C, tol=1e-9)
    assert alpha.sum() == pytest.approx(1.0, abs=1e-12)
    assert alpha.min() >= 0 and alpha.max() <= C * (1 + 1e-12)
    g = K @ alpha
    inside = alpha < 1e-12 * C
    at_bound = alpha > C * (1 - 1e-12)
    free = ~inside & ~at_bound
    assert np.all(g[inside] >= rho - 1e-8)
    assert np.all(g[at_bound] <= rho + 1e-8)
    assert np.allclose(g[free], rho, atol=1e-8)


def test_far_point_is_flagged():
    X = np.random.default_rng(3).normal(size=(200, 2))
    m = ocsvm_fit(X, nu=0.1, gamma=0.5)
    far = np.array([[60.0, -60.0]])
    assert m.decision(far)[0] == pytest.approx(-m.rho, abs=1e-12)
    assert ocsvm_score(m, far)[0] > 0


def test_permutation_invariance():
    r = np.random.default_rng(4)
    X = r.normal(size=(300, 2))
    Q = r.normal(size=(100, 2)) * 1.5
    perm = r.permutation(300)
    a = ocsvm_fit(X, 0.2, 0.5, tol=1e-9)
    b = ocsvm_fit(X[perm], 0.2, 0.5, tol=1e-9)
    assert np.max(np.abs(a.decision(Q) - b.decision(Q))) <= 1e-6
    # at the default tolerance two valid solutions may differ by a few tol
    c = ocsvm_fit(X, 0.2, 0.5)
    d = ocsvm_fit(X[perm], 0.2, 0.5)
    assert np.max(np.abs(c.decision(Q) - d.decision(Q))) <= 1e-5


def test_non_convergence_carries_residual():
    X = np.random.default_rng(5).normal(size=(100, 2))
    with pytest.raises(ConvergenceError) as err:
        ocsvm_fit(X, 0.1, 0.5, max_iter=2)
    assert err.value.residual > 0


def test_bad_inputs():
    with pytest.raises(DetectorError):
        ocsvm_fit(np.zeros((5, 2)), nu=0.0)
    with pytest.raises(DetectorError):
        ocsvm_fit(np.zeros((1, 2)))


def test_scale_gamma():
    X = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert scale_gamma(X) == pytest.approx(0.5)
    assert scale_gamma(np.ones((3, 2))) == 1.0


def test_round_trip_dict():
    X = np.random.default_rng(6).normal(size=(80, 2))
    m = ocsvm_fit(X, 0.2, None)
    back = OcsvmModel.from_dict(m.to_dict())
    assert np.array_equal(ocsvm_score(back, X), ocsvm_score(m, X))

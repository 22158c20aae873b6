"""Single-node solvers: forward-backward, L-BFGS wrapper, SVM dual CD."""

import numpy as np
import pytest

from oracles import (fd_gradient, lasso_kkt_violation, normal_equations_oracle,
                     pg_svm_oracle, svm_dual_objective_oracle)
from tradmm import (IdentityProx, L1Prox, LogisticRegressionOracle,
                    QuadraticOracle, RidgedOracle, fbs_solve, lbfgs_solve,
                    svm_dual_cd)
from tradmm.inner import svm_dual_objective


def lasso_oracle_pair(rng, m, n):
    data = rng.standard_normal((m, n))
    target = rng.standard_normal(m)
    smooth = QuadraticOracle(data.T @ data, data.T @ target,
                             const=0.5 * float(target @ target))
    return data, target, smooth


def test_fbs_identity_prox_solves_least_squares():
    rng = np.random.default_rng(30)
    data, target, smooth = lasso_oracle_pair(rng, 40, 6)
    res = fbs_solve(smooth, IdentityProx(), np.zeros(6), tol=1e-10, max_iter=5000)
    assert res.converged
    ref = normal_equations_oracle(data, target)
    assert np.max(np.abs(res.x - ref)) <= 1e-6


def test_fbs_scalar_lasso():
    # min |x| + 0.5 (x - 2)^2 has the closed-form solution 1
    smooth = QuadraticOracle(np.array([[1.0]]), np.array([2.0]))
    res = fbs_solve(smooth, L1Prox(1.0), np.zeros(1), tol=1e-12)
    assert res.converged
    assert abs(res.x[0] - 1.0) <= 1e-10


def test_fbs_lasso_satisfies_subgradient_conditions():
    rng = np.random.default_rng(31)
    data, target, smooth = lasso_oracle_pair(rng, 10, 4)
    mu = 0.6
    res = fbs_solve(smooth, L1Prox(mu), np.zeros(4), tol=1e-10, max_iter=20000)
    grad = data.T @ (data @ res.x - target)
    assert lasso_kkt_violation(res.x, grad, mu) <= 1e-5


def test_fbs_objective_monotone():
    rng = np.random.default_rng(32)
    data, target, smooth = lasso_oracle_pair(rng, 30, 8)
    mu = 0.4
    seen = []

    def watch(k, x):
        seen.append(smooth.value_grad(x)[0] + mu * np.abs(x).sum())

    fbs_solve(smooth, L1Prox(mu), np.zeros(8), tol=1e-9, callback=watch)
    diffs = np.diff(np.array(seen))
    assert np.all(diffs <= 1e-10)


def test_fbs_reports_nonconvergence():
    rng = np.random.default_rng(33)
    _, _, smooth = lasso_oracle_pair(rng, 30, 8)
    res = fbs_solve(smooth, L1Prox(0.1), np.zeros(8), tol=1e-14, max_iter=1)
    assert not res.converged
    assert res.iterations == 1


def test_fbs_warm_start_at_solution():
    rng = np.random.default_rng(34)
    _, _, smooth = lasso_oracle_pair(rng, 25, 5)
    first = fbs_solve(smooth, L1Prox(0.3), np.zeros(5), tol=1e-12, max_iter=20000)
    again = fbs_solve(smooth, L1Prox(0.3), first.x, tol=1e-10)
    assert again.iterations <= 1


def test_lbfgs_separable_quadratic_is_immediate():
    rng = np.random.default_rng(35)
    n = 6
    center = rng.standard_normal(n)
    res = lbfgs_solve(QuadraticOracle(np.eye(n), center), np.zeros(n), tol=1e-10)
    assert res.converged
    assert res.iterations <= n + 2
    assert np.max(np.abs(res.x - center)) <= 1e-8


def test_lbfgs_logistic_gradient_at_exit():
    # two separable clusters in the plane
    data = np.array([[1.0, 0.2], [0.8, -0.1], [-1.1, 0.3], [-0.9, -0.2]])
    labels = np.array([1.0, 1.0, -1.0, -1.0])
    oracle = RidgedOracle(LogisticRegressionOracle(data, labels), weight=0.1,
                          center=np.zeros(2))
    res = lbfgs_solve(oracle, np.zeros(2), tol=1e-8)
    assert res.converged
    assert np.linalg.norm(oracle.value_grad(res.x)[1]) <= 1e-6


def test_smooth_oracles_match_finite_differences():
    rng = np.random.default_rng(36)
    data = rng.standard_normal((15, 4))
    labels = np.where(rng.random(15) < 0.5, -1.0, 1.0)
    x = rng.standard_normal(4)
    for oracle in (LogisticRegressionOracle(data, labels),
                   QuadraticOracle(data.T @ data, data.T @ labels),
                   RidgedOracle(LogisticRegressionOracle(data, labels),
                                weight=0.7, center=rng.standard_normal(4))):
        fd = fd_gradient(lambda v: oracle.value_grad(v)[0], x)
        scale = max(1.0, float(np.max(np.abs(fd))))
        assert np.max(np.abs(oracle.value_grad(x)[1] - fd)) <= 1e-5 * scale


def test_lbfgs_warm_start_at_solution():
    rng = np.random.default_rng(37)
    data = rng.standard_normal((20, 3))
    labels = np.where(rng.random(20) < 0.5, -1.0, 1.0)
    oracle = RidgedOracle(LogisticRegressionOracle(data, labels), weight=1.0,
                          center=np.zeros(3))
    first = lbfgs_solve(oracle, np.zeros(3), tol=1e-10)
    second = lbfgs_solve(oracle, first.x, tol=1e-8)
    assert second.iterations <= 1


def test_svm_dual_cd_toy_hard_margin():
    """Four collinear points, max-margin direction along the first axis."""
    data = np.array([[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0], [-2.0, 0.0]])
    labels = np.array([1.0, 1.0, -1.0, -1.0])
    w, state = svm_dual_cd(data, labels, weight=10.0, tau=1e-10, z=np.zeros(2),
                           tol=1e-12, max_passes=500)
    assert state.converged
    direction = w / np.linalg.norm(w)
    assert np.max(np.abs(direction - np.array([1.0, 0.0]))) <= 1e-4


def test_svm_dual_cd_matches_projected_gradient():
    rng = np.random.default_rng(38)
    m, n = 30, 5
    data = rng.standard_normal((m, n))
    labels = np.where(rng.random(m) < 0.5, -1.0, 1.0)
    z = 0.5 * rng.standard_normal(n)
    weight, tau = 1.3, 0.8
    w, state = svm_dual_cd(data, labels, weight=weight, tau=tau, z=z,
                           tol=1e-10, max_passes=5000)
    _, ref_obj = pg_svm_oracle(data, labels, weight, tau, z)
    got_obj = svm_dual_objective_oracle(data, labels, weight, tau, z, state.alpha)
    assert abs(got_obj - ref_obj) <= 1e-6


def test_svm_dual_cd_warm_start_short_circuits():
    rng = np.random.default_rng(39)
    data = rng.standard_normal((25, 4))
    labels = np.where(rng.random(25) < 0.5, -1.0, 1.0)
    z = rng.standard_normal(4)
    w, state = svm_dual_cd(data, labels, weight=1.0, tau=1.0, z=z,
                           tol=1e-10, max_passes=5000)
    assert state.converged
    _, warmed = svm_dual_cd(data, labels, weight=1.0, tau=1.0, z=z,
                            warm=state, tol=1e-10, max_passes=5000)
    assert warmed.n_passes <= 1


def test_svm_dual_cd_box_and_cache_invariants():
    rng = np.random.default_rng(40)
    data = rng.standard_normal((40, 6))
    labels = np.where(rng.random(40) < 0.5, -1.0, 1.0)
    z = rng.standard_normal(6)
    weight, tau = 0.9, 1.7
    w, state = svm_dual_cd(data, labels, weight=weight, tau=tau, z=z,
                           tol=1e-10, max_passes=5000)
    assert np.all(state.alpha >= -1e-15)
    assert np.all(state.alpha <= weight + 1e-15)
    # the incrementally maintained weighted sum stays consistent
    rebuilt = data.T @ (labels * state.alpha)
    assert np.max(np.abs(state.w_cache - rebuilt)) <= 1e-10 * max(1.0, np.max(np.abs(rebuilt)))
    # primal recovery: w = (A'L alpha + tau z) / (1 + tau)
    assert np.max(np.abs(w - (rebuilt + tau * z) / (1.0 + tau))) <= 1e-12


def test_svm_dual_objective_decreases_with_passes():
    rng = np.random.default_rng(41)
    data = rng.standard_normal((30, 5))
    labels = np.where(rng.random(30) < 0.5, -1.0, 1.0)
    z = rng.standard_normal(5)
    prev = None
    for passes in (1, 2, 4, 8, 16):
        _, state = svm_dual_cd(data, labels, weight=1.1, tau=0.6, z=z,
                               tol=0.0, max_passes=passes)
        obj = svm_dual_objective(data, labels, 0.6, z, state.alpha)
        if prev is not None:
            assert obj <= prev + 1e-12
        prev = obj


def test_svm_dual_cd_label_validation():
    with pytest.raises(ValueError):
        svm_dual_cd(np.ones((2, 2)), np.array([0.5, 1.0]), weight=1.0, tau=1.0,
                    z=np.zeros(2))

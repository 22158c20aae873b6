"""Reference implementations the tests trust instead of the package.

Everything here is deliberately naive: triple-loop matrix products,
explicit Gauss-Jordan inversion, grid search plus scalar polish for the
proximal operators, and a long projected-gradient run for the SVM dual.
Slow is fine; independent is the point.
"""

import numpy as np
from scipy.optimize import brentq, minimize_scalar

GRID_POINTS = 4001


def _prox_objective_grid(kind, ys, z, delta, label, weight, shift):
    quad = (ys - z) ** 2 / (2.0 * delta)
    if kind == "l1":
        return weight * np.abs(ys) + quad
    if kind == "hinge":
        return weight * np.maximum(1.0 - label * ys, 0.0) + quad
    if kind == "logistic":
        return np.logaddexp(0.0, -label * ys) + quad
    if kind == "quadratic":
        # same sign convention as the package: the loss is 0.5*(y + shift)^2
        return 0.5 * (ys + shift) ** 2 + quad
    raise ValueError(f"unknown prox kind {kind!r}")


def prox_oracle_1d(kind, z, delta, label=1.0, weight=1.0, shift=0.0, radius=None):
    """Brute-force scalar prox: dense grid, then a bounded polish step.

    The grid span is chosen per kind so the true minimizer is always
    interior: the prox point can move at most ``delta`` times the largest
    subgradient magnitude away from ``z``, and each loss here has an
    explicit bound on that.
    """
    if kind == "linf":
        # projection onto [-radius, radius], not a penalty prox
        lo, hi = -radius, radius
        if radius == 0.0:
            return 0.0
    elif kind == "l1":
        pad = delta * weight + 1.0
        lo, hi = min(0.0, z) - pad, max(0.0, z) + pad
    elif kind == "hinge":
        kink = 1.0 / label
        pad = delta * weight + 1.0
        lo, hi = min(z, kink) - pad, max(z, kink) + pad
    elif kind == "logistic":
        pad = delta + 1.0
        lo, hi = z - pad, z + pad
    elif kind == "quadratic":
        lo, hi = min(z, -shift) - 1.0, max(z, -shift) + 1.0
    else:
        raise ValueError(f"unknown prox kind {kind!r}")

    ys = np.linspace(lo, hi, GRID_POINTS)
    if kind == "linf":
        vals = (ys - z) ** 2
    else:
        vals = _prox_objective_grid(kind, ys, z, delta, label, weight, shift)
    j = int(np.argmin(vals))
    a = ys[max(j - 1, 0)]
    b = ys[min(j + 1, GRID_POINTS - 1)]

    if kind == "linf":
        f = lambda y: (y - z) ** 2
    else:
        f = lambda y: float(_prox_objective_grid(kind, np.array([y]), z, delta,
                                                 label, weight, shift)[0])
    res = minimize_scalar(f, bounds=(a, b), method="bounded",
                          options={"xatol": 1e-11})
    best = float(res.x) if res.fun <= vals[j] else float(ys[j])
    return best


def logistic_prox_root(label, z, delta, tol=1e-12):
    """Solve the stationarity equation of the logistic prox by bisection."""
    def g(y):
        return (y - z) / delta - label / (1.0 + np.exp(label * y))
    lo, hi = z - delta - 1.0, z + delta + 1.0
    return brentq(g, lo, hi, xtol=tol)


def gram_oracle(mat):
    """D'D with three explicit loops."""
    mat = np.asarray(mat, dtype=np.float64)
    m, n = mat.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(m):
                acc += mat[k, i] * mat[k, j]
            out[i, j] = acc
    return out


def gauss_jordan_solve(mat, rhs):
    """Invert by Gauss-Jordan with partial pivoting, then multiply."""
    a = np.asarray(mat, dtype=np.float64).copy()
    n = a.shape[0]
    inv = np.eye(n)
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if a[pivot, col] == 0.0:
            raise np.linalg.LinAlgError("singular")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            inv[[col, pivot]] = inv[[pivot, col]]
        scale = a[col, col]
        a[col] /= scale
        inv[col] /= scale
        for row in range(n):
            if row != col and a[row, col] != 0.0:
                factor = a[row, col]
                a[row] -= factor * a[col]
                inv[row] -= factor * inv[col]
    return inv @ np.asarray(rhs, dtype=np.float64)


def normal_equations_oracle(data, target):
    data = np.asarray(data, dtype=np.float64)
    return gauss_jordan_solve(data.T @ data, data.T @ np.asarray(target))


def fd_gradient(func, x, h=1e-6):
    """Central finite differences, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        g[i] = (func(x + step) - func(x - step)) / (2.0 * h)
    return g


def pg_svm_oracle(data, labels, weight, tau, z, steps=10 ** 6):
    """Projected gradient on the box-constrained SVM dual.

    Runs a fixed-step scheme for up to ``steps`` iterations.  The map is
    deterministic, so a bitwise repeat (fixed point) or a bitwise
    two-cycle is permanent; both allow an early exit.  On a two-cycle the
    member with the lower dual objective is returned.
    """
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    big_m = data.shape[0]
    signed = labels[:, None] * data
    gram = signed @ signed.T
    lin = (1.0 + tau) * np.ones(big_m) - tau * labels * (data @ z)
    step = 1.0 / float(np.linalg.eigvalsh(gram)[-1])

    def objective(a):
        return 0.5 * float(a @ (gram @ a)) - float(lin @ a)

    alpha = np.zeros(big_m)
    prev = None
    for _ in range(steps):
        nxt = np.clip(alpha - step * (gram @ alpha - lin), 0.0, weight)
        if np.array_equal(nxt, alpha):
            break
        if prev is not None and np.array_equal(nxt, prev):
            if objective(prev) < objective(alpha):
                alpha = prev
            break
        prev = alpha
        alpha = nxt
    return alpha, objective(alpha)


def svm_dual_objective_oracle(data, labels, weight, tau, z, alpha):
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    signed = labels[:, None] * data
    gram = signed @ signed.T
    lin = (1.0 + tau) * np.ones(data.shape[0]) - tau * labels * (data @ z)
    return 0.5 * float(alpha @ (gram @ alpha)) - float(lin @ alpha)


def svm_stationarity_violation(data, labels, weight, tau, z, w_vec, alpha,
                               band=1e-7):
    """Subgradient residual of the proximal SVM sub-problem at ``w_vec``.

    The hinge subgradient at margin zero is recovered from the dual
    variables: coordinates inside the kink band take beta from alpha
    directly, clearly-violated margins force beta=1, satisfied ones
    beta=0.
    """
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    margins = 1.0 - labels * (data @ w_vec)
    beta = np.clip(np.asarray(alpha) / weight, 0.0, 1.0)
    beta = np.where(margins > band, 1.0, beta)
    beta = np.where(margins < -band, 0.0, beta)
    resid = w_vec + tau * (w_vec - z) - weight * ((beta * labels) @ data)
    return float(np.max(np.abs(resid)))


def lasso_kkt_violation(x, grad, mu):
    """Worst coordinate violation of 0 in grad + mu*sign(x)."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    worst = 0.0
    for j in range(x.size):
        if x[j] > 0.0:
            worst = max(worst, abs(grad[j] + mu))
        elif x[j] < 0.0:
            worst = max(worst, abs(grad[j] - mu))
        else:
            worst = max(worst, max(abs(grad[j]) - mu, 0.0))
    return worst

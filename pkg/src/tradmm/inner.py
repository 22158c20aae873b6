"""Sub-problem solvers: proximal gradient, L-BFGS, and a dual SVM solver.

These are the workhorses behind the per-node updates.  Smooth objectives are
passed as oracle objects exposing ``value_grad(x) -> (float, ndarray)``;
quadratics additionally expose a power-iteration Lipschitz estimate so the
proximal gradient loop can pick its own step.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .linalg import spectral_radius
from .prox import logistic_value

__all__ = [
    "SolveResult",
    "QuadraticOracle",
    "LogisticRegressionOracle",
    "RidgedOracle",
    "fbs_solve",
    "lbfgs_solve",
    "svm_dual_cd",
    "svm_dual_objective",
    "DualSvmState",
]


@dataclass
class SolveResult:
    x: np.ndarray
    converged: bool
    iterations: int


class QuadraticOracle:
    """``0.5 * x'Gx - x'r + const`` with G symmetric PSD."""

    def __init__(self, gram, rhs, const=0.0):
        self.gram = np.asarray(gram, dtype=np.float64)
        self.rhs = np.asarray(rhs, dtype=np.float64)
        self.const = float(const)
        self._lipschitz = None

    def value_grad(self, x):
        gx = self.gram @ x
        value = 0.5 * float(x @ gx) - float(x @ self.rhs) + self.const
        return value, gx - self.rhs

    def lipschitz(self):
        if self._lipschitz is None:
            self._lipschitz = spectral_radius(self.gram)
        return self._lipschitz


class LogisticRegressionOracle:
    """``sum_k log(1 + exp(-l_k * (D x)_k))`` over one data block."""

    def __init__(self, data, labels):
        self.data = np.asarray(data, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.float64)

    def value_grad(self, x):
        margins = self.labels * (self.data @ x)
        value = float(np.sum(logistic_value(margins)))
        grad = self.data.T @ (-self.labels * expit(-margins))
        return value, grad


class RidgedOracle:
    """``base(x) + (weight/2) * ||x - center||^2``, the proximal sub-problem."""

    def __init__(self, base, weight, center):
        self.base = base
        self.weight = float(weight)
        self.center = np.asarray(center, dtype=np.float64)

    def value_grad(self, x):
        value, grad = self.base.value_grad(x)
        diff = x - self.center
        return value + 0.5 * self.weight * float(diff @ diff), grad + self.weight * diff


def fbs_solve(smooth, prox, x0, step=None, tol=1e-8, max_iter=1000, callback=None):
    """Forward-backward splitting for ``smooth(x) + nonsmooth(x)``.

    Parameters
    ----------
    smooth : oracle
        Smooth part, via ``value_grad``.  When ``step`` is None the oracle
        must also expose ``lipschitz()``; the step then starts at ``1/L``
        and backtracks by halving whenever the quadratic upper bound fails,
        which keeps the composite objective non-increasing.
    prox : object
        Nonsmooth part, via ``prox(z, delta)``.
    x0 : array
        Start point.
    step : float, optional
        Fixed step size; must satisfy ``step <= 1/L`` for monotonicity.
    tol : float
        Stop when the relative change per iteration or the prox-gradient
        residual (inf norm) drops below ``tol``.
    callback : callable, optional
        Called as ``callback(k, x)`` after each accepted iterate.

    Returns
    -------
    SolveResult
        ``converged`` is False when ``max_iter`` was exhausted; the best
        iterate found is still returned.
    """
    x = np.array(x0, dtype=np.float64)
    backtrack = step is None
    if backtrack:
        lipschitz = smooth.lipschitz()
        t = 1.0 / lipschitz if lipschitz > 0 else 1.0
    else:
        t = float(step)
        if t <= 0:
            raise ValueError(f"step must be > 0, got {step}")

    value, grad = smooth.value_grad(x)
    for k in range(1, max_iter + 1):
        while True:
            x_new = prox.prox(x - t * grad, t)
            diff = x_new - x
            sq = float(diff @ diff)
            value_new, grad_new = smooth.value_grad(x_new)
            if not backtrack:
                break
            # quadratic upper bound check; halve the step until it holds
            if value_new <= value + float(grad @ diff) + sq / (2.0 * t) + 1e-12 * abs(value):
                break
            t *= 0.5
            if t < 1e-18:
                raise RuntimeError("backtracking step underflow; smooth oracle may be inconsistent")
        x, value, grad = x_new, value_new, grad_new
        if callback is not None:
            callback(k, x)
        residual = np.sqrt(sq) / t
        if np.sqrt(sq) <= tol * max(1.0, np.linalg.norm(x)) or residual <= tol:
            return SolveResult(x=x, converged=True, iterations=k)
    return SolveResult(x=x, converged=False, iterations=max_iter)


def lbfgs_solve(smooth, x0, memory=10, tol=1e-8, max_iter=500):
    """Minimize a smooth oracle with limited-memory BFGS.

    Wraps the battle-tested L-BFGS-B routine (no bounds).  ``tol`` is the
    inf-norm gradient target; the convergence flag is recomputed from the
    actual returned gradient rather than trusted from the status code.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    res = minimize(
        smooth.value_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={
            "maxcor": memory,
            "maxiter": max_iter,
            "gtol": tol,
            "ftol": 1e-18,
            "maxls": 50,
        },
    )
    _, grad = smooth.value_grad(res.x)
    converged = bool(np.max(np.abs(grad)) <= tol)
    return SolveResult(x=np.asarray(res.x, dtype=np.float64), converged=converged,
                       iterations=int(res.nit))


@dataclass
class DualSvmState:
    """Warm-startable state of the dual coordinate-descent SVM solver."""

    alpha: np.ndarray
    w_cache: np.ndarray
    residuals: np.ndarray
    n_passes: int = 0
    converged: bool = False


def _projected_gradient(grad, alpha, box_hi):
    pg = grad.copy()
    pg[(alpha <= 0.0) & (grad > 0.0)] = 0.0
    pg[(alpha >= box_hi) & (grad < 0.0)] = 0.0
    return pg


def svm_dual_objective(data, labels, tau, z, alpha):
    """Dual objective ``0.5*||A'L a||^2 - a'((1+tau)*1 - tau*l*(Az))``."""
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    w = data.T @ (labels * alpha)
    linear = (1.0 + tau) - tau * labels * (data @ np.asarray(z, dtype=np.float64))
    return 0.5 * float(w @ w) - float(alpha @ linear)


def svm_dual_cd(data, labels, weight, tau, z, warm=None, tol=1e-8, max_passes=1000):
    """Hinge-loss sub-problem via coordinate descent on its box dual.

    Solves ``min_w 0.5*||w||^2 + weight * hinge(data @ w, labels)
    + (tau/2)*||w - z||^2`` through the equivalent dual
    ``min_{0 <= a <= weight} 0.5*||data' L a||^2 - a'((1+tau)*1 - tau*l*(data z))``
    and recovers ``w = (data' L a + tau z) / (1 + tau)``.

    Each pass computes all projected gradients once, sweeps coordinates in
    descending order of that snapshot, and takes the exact one-dimensional
    minimizer clipped to the box, so the dual objective never increases.
    ``data' L a`` is carried incrementally and only rebuilt on entry.

    Returns
    -------
    (w, DualSvmState)
    """
    A = np.asarray(data, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"data must be 2-D, got shape {A.shape}")
    rows, cols = A.shape
    lab = np.asarray(labels, dtype=np.float64)
    if lab.shape != (rows,) or not np.all(np.abs(lab) == 1.0):
        raise ValueError("labels must be +1/-1 with one entry per data row")
    weight = float(weight)
    tau = float(tau)
    if weight <= 0.0:
        raise ValueError(f"weight must be > 0, got {weight}")
    if tau <= 0.0:
        raise ValueError(f"tau must be > 0, got {tau}")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (cols,):
        raise ValueError(f"z shape {z.shape} does not match feature count {cols}")

    linear = (1.0 + tau) - tau * lab * (A @ z)
    row_sq = np.einsum("ij,ij->i", A, A)

    if warm is not None:
        alpha = np.array(warm.alpha, dtype=np.float64)
        if alpha.shape != (rows,):
            raise ValueError("warm state does not match data shape")
        alpha = np.clip(alpha, 0.0, weight)
    else:
        alpha = np.zeros(rows)
    # rebuild the cache once on entry; per-update maintenance keeps it exact
    w_cache = A.T @ (lab * alpha)

    converged = False
    pg = np.zeros(rows)
    n_passes = 0
    for _ in range(max_passes):
        grad = lab * (A @ w_cache) - linear
        pg = _projected_gradient(grad, alpha, weight)
        if np.max(np.abs(pg), initial=0.0) <= tol:
            converged = True
            break
        n_passes += 1
        order = np.argsort(-np.abs(pg), kind="stable")
        for k in order:
            g_k = lab[k] * (A[k] @ w_cache) - linear[k]
            if row_sq[k] > 0.0:
                new = min(max(alpha[k] - g_k / row_sq[k], 0.0), weight)
            elif g_k < 0.0:
                new = weight
            elif g_k > 0.0:
                new = 0.0
            else:
                new = alpha[k]
            if new != alpha[k]:
                w_cache += (new - alpha[k]) * lab[k] * A[k]
                alpha[k] = new

    w = (w_cache + tau * z) / (1.0 + tau)
    state = DualSvmState(alpha=alpha, w_cache=w_cache, residuals=pg,
                         n_passes=n_passes, converged=converged)
    return w, state

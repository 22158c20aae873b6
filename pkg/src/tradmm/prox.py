"""Coordinate-separable proximal operators for the shard-local updates.

Each operator solves ``argmin_y f(y) + (1/(2*delta)) * (y - z)^2`` elementwise
for one loss family.  The module exposes the raw functions plus small wrapper
classes that bundle a loss with its per-shard targets, so solvers can treat
all families uniformly (``prox``, ``value``, and ``grad`` where smooth).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

__all__ = [
    "soft_threshold",
    "prox_l1",
    "prox_hinge",
    "prox_logistic",
    "prox_quadratic",
    "project_linf",
    "logistic_value",
    "build_lookup",
    "eval_lookup",
    "ProxLookupTable",
    "L1Prox",
    "QuadraticProx",
    "LogisticProx",
    "HingeProx",
    "LinfBallProx",
    "IdentityProx",
]

# Absolute tolerance on the prox objective gradient of the logistic solve.
LOGISTIC_GRAD_TOL = 1e-10
# Interpolation error budget the lookup table must meet at build time.
LOOKUP_INTERP_TOL = 1e-6


def _check_delta(delta):
    delta = float(delta)
    if not np.isfinite(delta) or delta <= 0.0:
        raise ValueError(f"delta must be finite and > 0, got {delta}")
    return delta


def _check_labels(labels, size=None):
    lab = np.asarray(labels, dtype=np.float64)
    if not np.all(np.abs(lab) == 1.0):
        raise ValueError("labels must be exactly +1 or -1")
    if size is not None and lab.shape != (size,):
        raise ValueError(f"labels shape {lab.shape} does not match data shape ({size},)")
    return lab


def soft_threshold(z, t):
    """Shrink ``z`` toward zero by ``t``: sign(z) * max(|z| - t, 0)."""
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def prox_l1(z, delta, mu):
    """Prox of ``mu * |y|``: soft threshold at ``mu * delta``."""
    delta = _check_delta(delta)
    mu = float(mu)
    if not np.isfinite(mu) or mu < 0.0:
        raise ValueError(f"mu must be finite and >= 0, got {mu}")
    return soft_threshold(z, mu * delta)


def prox_hinge(z, labels, delta):
    """Prox of the hinge loss ``max(1 - l*y, 0)``, elementwise.

    Closed form: ``z + l * clip(1 - l*z, 0, delta)``.
    """
    z = np.asarray(z, dtype=np.float64)
    delta = _check_delta(delta)
    lab = _check_labels(labels, z.shape[0] if z.ndim == 1 else None)
    return z + lab * np.clip(1.0 - lab * z, 0.0, delta)


def logistic_value(margin):
    """Stable elementwise ``log(1 + exp(-margin))``."""
    return np.logaddexp(0.0, -np.asarray(margin, dtype=np.float64))


def prox_logistic(z, labels, delta, tol=LOGISTIC_GRAD_TOL, max_iter=100):
    """Prox of the logistic loss ``log(1 + exp(-l*y))``, elementwise.

    No closed form exists; each coordinate is solved by Newton's method with
    a bisection safeguard.  By the symmetry ``prox(-1, z) = -prox(+1, -z)``
    the solve is reduced to the +1 label.  The root of
    ``g(u) = (u - w)/delta - sigmoid(-u)`` always lies in ``[w, w + delta]``,
    which provides the safeguard bracket.  Iterates until ``|g| <= tol``.
    """
    z = np.asarray(z, dtype=np.float64)
    delta = _check_delta(delta)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    lab = _check_labels(np.broadcast_to(labels, z.shape), z.shape[0])

    w = lab * z
    lo = w.copy()
    hi = w + delta
    u = w + delta * expit(w)  # linearized guess, always inside the bracket
    g = (u - w) / delta - expit(-u)
    for _ in range(max_iter):
        live = np.abs(g) > tol
        if not live.any():
            break
        # maintain the bracket from the sign of g, then take a Newton step
        lo = np.where(live & (g < 0), u, lo)
        hi = np.where(live & (g > 0), u, hi)
        gprime = 1.0 / delta + expit(u) * expit(-u)
        step = np.where(live, u - g / gprime, u)
        outside = (step <= lo) | (step >= hi)
        u = np.where(live & outside, 0.5 * (lo + hi), np.where(live, step, u))
        g = (u - w) / delta - expit(-u)
    else:
        raise RuntimeError("logistic prox did not reach tolerance; inputs may be non-finite")

    out = lab * u
    return out[0] if scalar else out


def prox_quadratic(z, b, delta):
    """Prox of ``0.5 * (y + b)^2``: ``(z - delta*b) / (1 + delta)``."""
    z = np.asarray(z, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.shape not in ((), z.shape):
        raise ValueError(f"shift shape {b.shape} does not match input shape {z.shape}")
    delta = _check_delta(delta)
    return (z - delta * b) / (1.0 + delta)


def project_linf(z, radius):
    """Euclidean projection onto the box ``|y| <= radius`` (prox of its indicator)."""
    radius = float(radius)
    if not np.isfinite(radius) or radius < 0.0:
        raise ValueError(f"radius must be finite and >= 0, got {radius}")
    return np.clip(np.asarray(z, dtype=np.float64), -radius, radius)


@dataclass
class ProxLookupTable:
    """Sampled logistic prox for label +1 on a uniform grid.

    Queries for label -1 go through the symmetry ``prox(-1, z) = -prox(+1, -z)``;
    queries outside ``[lo, hi]`` fall back to the exact Newton solve.
    """

    delta: float
    lo: float
    hi: float
    step: float
    grid: np.ndarray
    values: np.ndarray

    @property
    def nbytes(self):
        return self.grid.nbytes + self.values.nbytes


def build_lookup(kind, delta, lo=-30.0, hi=30.0, step=1e-3):
    """Tabulate a prox on ``[lo, hi]`` with spacing ``step``.

    Only the logistic loss is table-backed; the other losses have closed
    forms.  The table is validated at build time: linear interpolation at
    the grid midpoints must agree with the exact prox to 1e-6.
    """
    if kind != "logistic":
        raise ValueError(f"no lookup table for kind {kind!r}")
    delta = _check_delta(delta)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError(f"bad table range [{lo}, {hi}]")
    count = round((hi - lo) / step)
    if count < 1 or abs(lo + count * step - hi) > 1e-9 * max(1.0, abs(hi)):
        raise ValueError(f"step {step} does not evenly divide [{lo}, {hi}]")
    grid = np.linspace(lo, hi, count + 1)
    values = prox_logistic(grid, 1.0, delta)

    mids = 0.5 * (grid[:-1] + grid[1:])
    exact = prox_logistic(mids, 1.0, delta)
    interp = 0.5 * (values[:-1] + values[1:])
    worst = float(np.max(np.abs(interp - exact)))
    if worst > LOOKUP_INTERP_TOL:
        raise ValueError(
            f"lookup interpolation error {worst:.3e} exceeds {LOOKUP_INTERP_TOL:.1e}; "
            "use a finer step"
        )
    return ProxLookupTable(delta=delta, lo=float(lo), hi=float(hi), step=float(step),
                           grid=grid, values=values)


def eval_lookup(table, z, labels):
    """Evaluate the tabulated prox at ``z`` for ``labels``."""
    z = np.asarray(z, dtype=np.float64)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    lab = _check_labels(np.broadcast_to(labels, z.shape), z.shape[0])
    w = lab * z
    out = np.empty_like(w)
    inside = (w >= table.lo) & (w <= table.hi)
    if inside.any():
        out[inside] = np.interp(w[inside], table.grid, table.values)
    if (~inside).any():
        out[~inside] = prox_logistic(w[~inside], 1.0, table.delta)
    out *= lab
    return out[0] if scalar else out


# --- loss wrappers used by the splitting solvers -------------------------
#
# Each bundles a loss with its per-shard targets.  ``prox(z, delta)`` is the
# shard-local update, ``value(z)`` the loss term it contributes to the
# objective, and ``grad(z)`` exists only where the loss is differentiable.


@dataclass
class L1Prox:
    mu: float
    differentiable = False

    def prox(self, z, delta):
        return prox_l1(z, delta, self.mu)

    def value(self, z):
        return self.mu * float(np.sum(np.abs(z)))


@dataclass
class QuadraticProx:
    """``0.5 * ||z + shift||^2``; for a fit to targets b use shift = -b."""

    shift: np.ndarray
    differentiable = True
    grad_lipschitz = 1.0

    def prox(self, z, delta):
        return prox_quadratic(z, self.shift, delta)

    def value(self, z):
        return 0.5 * float(np.sum((z + self.shift) ** 2))

    def grad(self, z):
        return z + self.shift


@dataclass
class LogisticProx:
    labels: np.ndarray
    table: ProxLookupTable | None = None
    differentiable = True
    grad_lipschitz = 0.25

    def prox(self, z, delta):
        if self.table is not None and self.table.delta == delta:
            return eval_lookup(self.table, z, self.labels)
        return prox_logistic(z, self.labels, delta)

    def value(self, z):
        return float(np.sum(logistic_value(self.labels * z)))

    def grad(self, z):
        return -self.labels * expit(-self.labels * z)


@dataclass
class HingeProx:
    """``weight * sum(max(1 - l*z, 0))``; the weight folds into delta."""

    labels: np.ndarray
    weight: float = 1.0
    differentiable = False

    def prox(self, z, delta):
        return prox_hinge(z, self.labels, self.weight * delta)

    def value(self, z):
        return self.weight * float(np.sum(np.maximum(1.0 - self.labels * z, 0.0)))


@dataclass
class LinfBallProx:
    """Indicator of ``|z| <= radius``; its prox is the box projection."""

    radius: float
    differentiable = False

    def prox(self, z, delta):
        return project_linf(z, self.radius)

    def value(self, z):
        # Contributes nothing when feasible; feasibility is tracked by the
        # solver's residuals rather than an infinite objective.
        return 0.0


@dataclass
class IdentityProx:
    differentiable = True
    grad_lipschitz = 0.0

    def prox(self, z, delta):
        return np.asarray(z, dtype=np.float64)

    def value(self, z):
        return 0.0

    def grad(self, z):
        return np.zeros_like(z)

"""Shard-level dense linear algebra for the central least-squares updates.

Every solver in this package funnels its x-update through the same pattern:
workers form local Gram products from their row blocks, the driver sums the
contributions in a fixed shard order, factorizes the aggregate once, and
back-solves against it every iteration.  Keeping the sum order fixed makes
the whole pipeline bitwise reproducible run to run.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

__all__ = [
    "SingularGramError",
    "GramContribution",
    "GramSystem",
    "as_matrix",
    "gram_accumulate",
    "gram_reduce",
    "gram_reduce_auto",
    "solve_spd",
    "matvec",
    "spectral_radius",
]

# Relative ridge used by the retry path of gram_reduce_auto.
AUTO_RIDGE_SCALE = 1e-10


class SingularGramError(np.linalg.LinAlgError):
    """Raised when the aggregated Gram matrix has a non-positive pivot.

    ``pivot`` is the zero-based index of the first pivot that failed, as
    reported by the Cholesky factorization.
    """

    def __init__(self, pivot):
        self.pivot = int(pivot)
        super().__init__(
            "aggregated Gram matrix is not positive definite: "
            f"pivot {self.pivot} is not positive"
        )


def as_matrix(a, name="matrix"):
    """Validate ``a`` as a finite 2-D float64 array in row-major order."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def _as_vector(v, name="vector"):
    out = np.ascontiguousarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


@dataclass
class GramContribution:
    """One shard's share of the normal equations: D_i^T D_i and optional D_i^T r."""

    gram: np.ndarray
    rhs: np.ndarray | None = None

    @property
    def dim(self):
        return self.gram.shape[0]


@dataclass
class GramSystem:
    """Factorized aggregate of shard Gram contributions.

    ``factor`` holds the lower Cholesky factor of ``sum_i G_i + ridge * I``;
    it is reused for every subsequent solve.
    """

    dim: int
    factor: np.ndarray
    ridge: float
    agg_rhs: np.ndarray | None = None


def gram_accumulate(shard, rhs_source=None):
    """Compute one shard's Gram contribution.

    Parameters
    ----------
    shard : array, shape (rows, n)
        Local row block.  Must have at least one row.
    rhs_source : array, shape (rows,), optional
        Local slice of a right-hand-side vector; when given, the
        contribution also carries ``shard.T @ rhs_source``.

    Returns
    -------
    GramContribution
        With ``gram`` exactly symmetric (lower triangle mirrored).
    """
    mat = as_matrix(shard, "shard")
    if mat.shape[0] < 1:
        raise ValueError("shard must have at least one row")
    gram = mat.T @ mat
    # gemm output is not guaranteed bitwise symmetric; mirror the lower half.
    gram = np.tril(gram) + np.tril(gram, -1).T
    rhs = None
    if rhs_source is not None:
        src = _as_vector(rhs_source, "rhs_source")
        if src.shape[0] != mat.shape[0]:
            raise ValueError(
                f"rhs_source length {src.shape[0]} does not match shard rows {mat.shape[0]}"
            )
        rhs = mat.T @ src
    return GramContribution(gram=gram, rhs=rhs)


def gram_reduce(parts, ridge=0.0):
    """Sum shard contributions in list order, shift by ``ridge``, factorize.

    Parameters
    ----------
    parts : sequence of GramContribution
        Summed left to right (ascending shard index), which keeps the
        reduction deterministic.
    ridge : float
        Nonnegative diagonal shift added before factorization.

    Returns
    -------
    GramSystem

    Raises
    ------
    SingularGramError
        If the shifted sum is not positive definite; names the failing pivot.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("gram_reduce needs at least one contribution")
    ridge = float(ridge)
    if not np.isfinite(ridge) or ridge < 0.0:
        raise ValueError(f"ridge must be finite and >= 0, got {ridge}")
    dim = parts[0].dim
    total = parts[0].gram.copy()
    for p in parts[1:]:
        if p.dim != dim:
            raise ValueError(f"contribution dimension {p.dim} does not match {dim}")
        total += p.gram

    with_rhs = [p for p in parts if p.rhs is not None]
    if with_rhs and len(with_rhs) != len(parts):
        raise ValueError("either all contributions carry an rhs or none may")
    agg_rhs = None
    if with_rhs:
        agg_rhs = parts[0].rhs.copy()
        for p in parts[1:]:
            agg_rhs += p.rhs

    shifted = total
    if ridge > 0.0:
        shifted = shifted + ridge * np.eye(dim)
    factor, info = dpotrf(shifted, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise SingularGramError(pivot=info - 1)
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of Cholesky factorization")
    return GramSystem(dim=dim, factor=factor, ridge=ridge, agg_rhs=agg_rhs)


def gram_reduce_auto(parts):
    """gram_reduce with the default ridge policy.

    Tries an unshifted factorization first; on a pivot failure retries once
    with a relative shift of ``1e-10 * trace / dim`` and warns.  A second
    failure propagates.
    """
    parts = list(parts)
    try:
        return gram_reduce(parts, ridge=0.0)
    except SingularGramError:
        dim = parts[0].dim
        trace = sum(float(np.trace(p.gram)) for p in parts)
        ridge = AUTO_RIDGE_SCALE * trace / dim
        warnings.warn(
            f"Gram matrix not positive definite; retrying with ridge {ridge:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
        return gram_reduce(parts, ridge=ridge)


def solve_spd(system, rhs):
    """Solve the factorized system against ``rhs`` via two triangular solves."""
    b = _as_vector(rhs, "rhs")
    if b.shape[0] != system.dim:
        raise ValueError(f"rhs length {b.shape[0]} does not match system dim {system.dim}")
    return cho_solve((system.factor, True), b)


def matvec(mat, v, transposed=False):
    """Apply ``mat`` (or its transpose) to ``v`` with shape checks."""
    mat = np.asarray(mat)
    v = np.asarray(v)
    need = mat.shape[0] if transposed else mat.shape[1]
    if v.shape != (need,):
        raise ValueError(f"vector shape {v.shape} incompatible with matrix {mat.shape}"
                         f"{' transposed' if transposed else ''}")
    return mat.T @ v if transposed else mat @ v


def spectral_radius(sym, tol=1e-12, max_iter=1000):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Deterministic: starts from a fixed ramp vector rather than a random one.
    """
    sym = np.asarray(sym, dtype=np.float64)
    n = sym.shape[0]
    if n == 0:
        return 0.0
    v = np.linspace(1.0, 2.0, n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = sym @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new = float(v @ (sym @ v))
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new
        lam = new
    return lam

"""Problem descriptions shared by all solvers.

A ``ProblemSpec`` names the loss family, carries the sharded data, and knows
which separable prox each shard contributes.  Sparse (l1-penalized) models
are handled by appending an identity block as an extra shard whose loss is
the penalty itself; column-sharded lasso problems are rewritten into their
box-constrained dual, which is again a row-sharded problem.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import Shard
from .prox import (HingeProx, L1Prox, LinfBallProx, LogisticProx,
                   QuadraticProx, logistic_value)

__all__ = [
    "KINDS",
    "ProblemSpec",
    "SolverConfig",
    "least_squares_problem",
    "logistic_problem",
    "svm_problem",
    "lasso_problem",
    "lasso_columns_problem",
    "sparse_logistic_problem",
    "augment_sparse",
    "dualize_columns",
]

KINDS = ("least_squares", "logistic", "svm", "lasso", "sparse_logistic", "dual_lasso")
_LABEL_KINDS = ("logistic", "svm", "sparse_logistic")


@dataclass
class SolverConfig:
    """Run parameters shared by the splitting solvers.

    ``tau_ref`` optionally holds a ``(rows_ref, tau_ref)`` pair; the penalty
    then scales proportionally with the row count actually solved, so a
    value tuned at one size transfers to another.
    """

    tau: float = 1.0
    eps_rel: float = 1e-3
    eps_abs: float = 1e-6
    max_iter: int = 5000
    seed: int = 0
    tau_ref: tuple[float, float] | None = None
    use_lookup: bool = False
    record_iterates: bool = False
    warm_start: object | None = None
    inner_tol: float = 1e-8
    inner_max_iter: int = 200

    def effective_tau(self, total_rows):
        if self.tau_ref is None:
            return float(self.tau)
        rows_ref, tau_ref = self.tau_ref
        if rows_ref <= 0 or tau_ref <= 0:
            raise ValueError(f"tau_ref must be positive, got {self.tau_ref}")
        return float(tau_ref) * total_rows / float(rows_ref)

    def validate(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be finite and > 0, got {self.tau}")
        if self.eps_rel < 0 or self.eps_abs < 0:
            raise ValueError("tolerances must be >= 0")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


def _check_shards(shards, want_targets, labels=False):
    shards = [s if isinstance(s, Shard) else Shard(*s) for s in shards]
    if not shards:
        raise ValueError("at least one shard required")
    cols = shards[0].cols
    for s in shards:
        if s.cols != cols:
            raise ValueError("shards disagree on column count")
        if want_targets:
            if s.targets is None:
                raise ValueError("every shard must carry targets for this loss")
            if labels and not np.all(np.abs(s.targets) == 1.0):
                raise ValueError("labels must be exactly +1 or -1")
    return shards


@dataclass
class ProblemSpec:
    """Loss family plus sharded data.

    ``augmented`` marks that the final shard is the identity block carrying
    the l1 penalty.  ``full_target`` is only used by column-sharded lasso
    problems, where the fit vector is not split across shards.
    """

    kind: str
    shards: list
    sharding: str = "rows"
    mu: float | None = None
    weight: float | None = None  # hinge weight for svm
    augmented: bool = False
    bias_col: int | None = None
    full_target: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.sharding not in ("rows", "cols"):
            raise ValueError(f"sharding must be 'rows' or 'cols', got {self.sharding!r}")

    # -- shapes ------------------------------------------------------------

    @property
    def n_features(self):
        if self.sharding == "cols":
            return sum(s.data.shape[1] for s in self.shards)
        return self.shards[0].cols

    @property
    def total_rows(self):
        if self.sharding == "cols":
            return self.shards[0].data.shape[0]
        return sum(s.rows for s in self.shards)

    @property
    def n_shards(self):
        return len(self.shards)

    # -- per-shard separable losses ----------------------------------------

    def shard_prox(self, index, table=None):
        """The separable loss attached to shard ``index``."""
        if self.sharding != "rows":
            raise ValueError("column-sharded problems have no per-shard prox; dualize first")
        shard = self.shards[index]
        last = index == self.n_shards - 1
        if self.kind == "least_squares":
            return QuadraticProx(shift=-shard.targets)
        if self.kind == "logistic":
            return LogisticProx(labels=shard.targets, table=table)
        if self.kind == "svm":
            return HingeProx(labels=shard.targets, weight=self.weight)
        if self.kind == "lasso":
            if self.augmented and last:
                return L1Prox(mu=self.mu)
            return QuadraticProx(shift=-shard.targets)
        if self.kind == "sparse_logistic":
            if self.augmented and last:
                return L1Prox(mu=self.mu)
            return LogisticProx(labels=shard.targets, table=table)
        if self.kind == "dual_lasso":
            if index == 0:
                return QuadraticProx(shift=shard.targets)
            return LinfBallProx(radius=self.mu)
        raise AssertionError(self.kind)

    @property
    def quadratic_model_term(self):
        """Weight of an explicit ``0.5*||x||^2`` term outside the splitting."""
        return 1.0 if self.kind == "svm" else 0.0

    @property
    def smooth_loss(self):
        """Whether the splittable loss is differentiable everywhere."""
        if self.kind in ("least_squares", "logistic"):
            return True
        if self.kind in ("lasso", "sparse_logistic") and not self.augmented:
            return False
        return False

    @property
    def grad_lipschitz(self):
        if self.kind == "least_squares":
            return 1.0
        if self.kind == "logistic":
            return 0.25
        return None

    # -- serial diagnostics --------------------------------------------------

    def dense_data(self):
        """Stack shards back into the full matrix (tests and diagnostics)."""
        if self.sharding == "cols":
            return np.hstack([s.data for s in self.shards])
        return np.vstack([s.data for s in self.shards])

    def dense_targets(self):
        if self.sharding == "cols":
            return None if self.full_target is None else self.full_target.copy()
        if any(s.targets is None for s in self.shards):
            return None
        return np.concatenate([s.targets for s in self.shards])

    def objective(self, x):
        """Canonical objective value at ``x`` (serial; diagnostics only)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind in ("lasso", "sparse_logistic") and not self.augmented:
            if self.sharding == "cols":
                D = self.dense_data()
                resid = D @ x - self.full_target
                return self.mu * float(np.sum(np.abs(x))) + 0.5 * float(resid @ resid)
            total = self.mu * float(np.sum(np.abs(x)))
            for i, s in enumerate(self.shards):
                z = s.data @ x
                if self.kind == "lasso":
                    total += 0.5 * float((z - s.targets) @ (z - s.targets))
                else:
                    total += float(np.sum(logistic_value(s.targets * z)))
            return total
        total = 0.5 * self.quadratic_model_term * float(x @ x)
        for i, s in enumerate(self.shards):
            total += self.shard_prox(i).value(s.data @ x)
        return total


# --- constructors ----------------------------------------------------------


def least_squares_problem(shards):
    return ProblemSpec(kind="least_squares", shards=_check_shards(shards, True))


def logistic_problem(shards):
    return ProblemSpec(kind="logistic", shards=_check_shards(shards, True, labels=True))


def svm_problem(shards, weight=1.0):
    weight = float(weight)
    if weight <= 0:
        raise ValueError(f"hinge weight must be > 0, got {weight}")
    return ProblemSpec(kind="svm", shards=_check_shards(shards, True, labels=True),
                       weight=weight)


def _check_mu(mu):
    mu = float(mu)
    if not np.isfinite(mu) or mu < 0:
        raise ValueError(f"mu must be finite and >= 0, got {mu}")
    return mu


def lasso_problem(shards, mu):
    return ProblemSpec(kind="lasso", shards=_check_shards(shards, True), mu=_check_mu(mu))


def sparse_logistic_problem(shards, mu):
    return ProblemSpec(kind="sparse_logistic",
                       shards=_check_shards(shards, True, labels=True), mu=_check_mu(mu))


def lasso_columns_problem(column_blocks, fit_target, mu):
    """Lasso with the matrix split by columns; ``fit_target`` stays whole."""
    blocks = [np.asarray(b, dtype=np.float64) for b in column_blocks]
    if not blocks:
        raise ValueError("at least one column block required")
    rows = blocks[0].shape[0]
    for b in blocks:
        if b.ndim != 2 or b.shape[0] != rows:
            raise ValueError("column blocks disagree on row count")
    b = np.asarray(fit_target, dtype=np.float64)
    if b.shape != (rows,):
        raise ValueError(f"fit target shape {b.shape} does not match row count {rows}")
    shards = [Shard(block, None) for block in blocks]
    return ProblemSpec(kind="lasso", shards=shards, sharding="cols",
                       mu=_check_mu(mu), full_target=b)


# --- rewrites ---------------------------------------------------------------


def augment_sparse(problem, mu):
    """Fold an l1 penalty into the splitting by appending an identity shard.

    The stacked matrix gains an ``n x n`` identity block whose separable loss
    is ``mu * |z|``; the first shards keep the original fit loss.  Only
    row-sharded lasso and sparse-logistic problems qualify.
    """
    if problem.kind not in ("lasso", "sparse_logistic"):
        raise ValueError(f"cannot augment problem kind {problem.kind!r}")
    if problem.sharding != "rows":
        raise ValueError("cannot augment a column-sharded problem; dualize instead")
    if problem.augmented:
        raise ValueError("problem is already augmented")
    mu = _check_mu(mu)
    if mu <= 0:
        raise ValueError("augmentation requires mu > 0")
    n = problem.n_features
    shards = list(problem.shards) + [Shard(np.eye(n), None)]
    return replace(problem, shards=shards, mu=mu, augmented=True)


def dualize_columns(problem):
    """Rewrite a column-sharded lasso into its box-constrained dual.

    The dual variable has one entry per data row.  Its stacked matrix is the
    identity over the rows (quadratic fit shard, loss ``0.5*||z + b||^2``)
    on top of the transposed column blocks, each constrained to the box
    ``|z| <= mu``.  Workers therefore contribute ``B B^T`` Gram blocks, where
    ``B`` is their slice of columns.
    """
    if problem.kind != "lasso" or problem.sharding != "cols":
        raise ValueError("dualize_columns expects a column-sharded lasso problem")
    m = problem.total_rows
    shards = [Shard(np.eye(m), problem.full_target)]
    shards += [Shard(np.ascontiguousarray(s.data.T), None) for s in problem.shards]
    return ProblemSpec(kind="dual_lasso", shards=shards, sharding="rows", mu=problem.mu)

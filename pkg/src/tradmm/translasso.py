"""One-shot distributed lasso: ship the normal equations, iterate locally.

The fitted objective ``mu*|x|_1 + 0.5*||Dx - b||^2`` depends on the data
only through ``D^T D``, ``D^T b``, and ``||b||^2``.  Each worker computes
its local share of those, a single reduction aggregates them, and all
iterations then run on the driver with zero further traffic.  The wire cost
is one n-by-n matrix plus an n-vector (and one scalar) per worker, no
matter how many rows the workers hold or how many iterations the solve
takes.
"""

import time

import numpy as np

from .inner import QuadraticOracle, fbs_solve
from .linalg import gram_accumulate
from .prox import L1Prox
from .record import ConvergenceRecord

__all__ = ["transpose_lasso", "lasso_objective", "dual_lasso_report"]


def lasso_objective(x, mu, data=None, target=None, gram=None, rhs=None, b_sq=None):
    """Lasso objective through either the data or its aggregated statistics.

    Pass ``data=D, target=b`` for the direct form, or ``gram=D^T D,
    rhs=D^T b, b_sq=||b||^2`` for the expanded quadratic.  The two paths
    agree to float64 rounding on consistent inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    penalty = mu * float(np.sum(np.abs(x)))
    if data is not None:
        if target is None:
            raise ValueError("data path needs target")
        resid = np.asarray(data, dtype=np.float64) @ x - np.asarray(target, dtype=np.float64)
        return penalty + 0.5 * float(resid @ resid)
    if gram is None or rhs is None or b_sq is None:
        raise ValueError("pass either data/target or gram/rhs/b_sq")
    gram = np.asarray(gram, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    return penalty + 0.5 * float(x @ (gram @ x)) - float(rhs @ x) + 0.5 * float(b_sq)


def transpose_lasso(cluster, b_shards, mu, cfg):
    """Solve a row-sharded lasso with a single aggregation round.

    Parameters
    ----------
    cluster : Cluster
        Workers holding the row blocks of the design matrix.
    b_shards : sequence of vectors
        Matching row blocks of the observation vector, one per worker.
    mu : float
        l1 weight, must be positive.
    cfg : SolverConfig
        ``inner_tol`` bounds the final prox-gradient residual and
        ``max_iter`` caps the local iteration count; the distributed knobs
        (tau, eps_rel, eps_abs) are not used here.

    Returns
    -------
    (x, record)
        Minimizer and a ConvergenceRecord whose per-iteration byte columns
        are all zero: after setup the cluster is never contacted again.
    """
    cfg.validate()
    if mu <= 0:
        raise ValueError("mu must be positive")
    if len(b_shards) != cluster.n_workers:
        raise ValueError(f"{len(b_shards)} target shards for {cluster.n_workers} workers")
    n = cluster.workers[0].data.shape[1]

    t_setup = time.perf_counter()

    def local_stats(worker):
        b_i = np.ascontiguousarray(b_shards[worker.index], dtype=np.float64)
        contrib = gram_accumulate(worker.data, b_i)
        return contrib.gram, contrib.rhs, np.array([b_i @ b_i])

    parts = cluster.all_execute(local_stats)
    gram = cluster.reduce_sum([p[0] for p in parts]).payload
    rhs = cluster.reduce_sum([p[1] for p in parts]).payload
    b_sq = float(cluster.reduce_sum([p[2] for p in parts]).payload[0])
    setup_seconds = time.perf_counter() - t_setup

    record = ConvergenceRecord(meta={
        "solver": "transpose_lasso",
        "problem": "lasso",
        "m": sum(w.data.shape[0] for w in cluster.workers),
        "n": n,
        "n_workers": cluster.n_workers,
        "mu": mu,
        "seed": cfg.seed,
        "max_iter": cfg.max_iter,
        "inner_tol": cfg.inner_tol,
        "setup_bytes_up": cluster.counters.bytes_up,
        "setup_bytes_down": cluster.counters.bytes_down,
        "setup_seconds": setup_seconds,
    })
    if cfg.record_iterates:
        record.iterates = []

    oracle = QuadraticOracle(gram, rhs, const=0.5 * b_sq)
    prox = L1Prox(mu)
    clock = [time.perf_counter()]

    def log_row(k, x):
        now = time.perf_counter()
        record.add_row(
            k=k,
            wall_s=now - clock[0],
            compute_s=now - clock[0],
            barrier_s=0.0,
            objective=lasso_objective(x, mu, gram=gram, rhs=rhs, b_sq=b_sq),
            bytes_up=0,
            bytes_down=0,
            inner_iterations=1,
        )
        clock[0] = now
        if record.iterates is not None:
            record.iterates.append(x.copy())

    x0 = np.zeros(n) if cfg.warm_start is None else np.asarray(cfg.warm_start, dtype=np.float64)
    result = fbs_solve(oracle, prox, x0, tol=cfg.inner_tol, max_iter=cfg.max_iter,
                       callback=log_row)

    grad = gram @ result.x - rhs
    record.meta["status"] = "converged" if result.converged else "max_iter"
    record.meta["iterations"] = result.iterations
    record.meta["final_objective"] = lasso_objective(result.x, mu, gram=gram, rhs=rhs, b_sq=b_sq)
    record.meta["certificate_inf"] = float(subgradient_gap(result.x, grad, mu))
    record.final_state = result
    return result.x, record


def subgradient_gap(x, grad, mu):
    """Worst per-coordinate violation of the lasso optimality condition.

    ``grad`` is the smooth gradient ``D^T D x - D^T b``.  Zero coordinates
    need ``|grad_j| <= mu``; active ones need ``grad_j = -mu*sign(x_j)``.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    active = x != 0.0
    gap = np.maximum(np.abs(grad) - mu, 0.0)
    gap[active] = np.abs(grad[active] + mu * np.sign(x[active]))
    return float(np.max(gap)) if gap.size else 0.0


def dual_lasso_report(alpha, problem, tol=1e-6, recover=False):
    """Summarize a solved height-form lasso dual.

    ``alpha`` is the length-m iterate returned by the row-split solver on a
    dualized column-sharded lasso; ``problem`` is that dual problem (its
    first shard carries the identity block and the full observation vector,
    the rest hold transposed column blocks).  Reports the dual objective
    ``0.5*||alpha + b||^2``, the implied bound ``0.5*||b||^2 - dual`` on the
    primal optimum, and the active constraint set where ``|D^T alpha|``
    reaches the l1 weight within ``tol``.

    With ``recover=True`` a primal candidate is fit by least squares on the
    active columns.  There is no exact recovery map from the dual iterate,
    so the candidate is a heuristic; judge it by its own objective.
    """
    if problem.kind != "dual_lasso":
        raise ValueError("dual_lasso_report needs a dual_lasso problem")
    alpha = np.asarray(alpha, dtype=np.float64)
    b = problem.shards[0].targets
    mu = problem.mu
    # column blocks were stored transposed; stack D^T alpha per block
    corr = np.concatenate([s.data @ alpha for s in problem.shards[1:]])
    dual_obj = 0.5 * float((alpha + b) @ (alpha + b))
    report = {
        "alpha": alpha,
        "dual_objective": dual_obj,
        "primal_objective_bound": 0.5 * float(b @ b) - dual_obj,
        "constraint_inf": float(np.max(np.abs(corr))) if corr.size else 0.0,
        "active_set": np.flatnonzero(np.abs(np.abs(corr) - mu) <= tol),
    }
    if recover:
        cols = np.vstack([s.data for s in problem.shards[1:]]).T  # back to m x n
        support = report["active_set"]
        x = np.zeros(cols.shape[1])
        if support.size:
            sol, *_ = np.linalg.lstsq(cols[:, support], b + alpha, rcond=None)
            x[support] = sol
        report["x_heuristic"] = x
    return report

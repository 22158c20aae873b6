"""Row-distributed splitting solver with one global least-squares x-update.

The model variable is updated exactly on the driver: workers fold their
``D_i^T D_i`` blocks into a single Gram system once at setup, and each
iteration they push up the transpose-reduced image of their local residual
``y_i - lambda_i``.  The fit variable and the multipliers never leave the
workers; the loss prox is applied shard-locally, coordinate by coordinate.

Communication counters model the wire protocol of a real deployment: the
x-update consumes the stacked residual vector (one entry per data row) going
up and the model vector going down to every worker.  Residual and objective
reductions are diagnostics and are excluded from both byte and compute
accounting.
"""

import time
from dataclasses import dataclass

import numpy as np

from .linalg import (gram_accumulate, gram_reduce, gram_reduce_auto,
                     solve_spd, spectral_radius)
from .prox import build_lookup
from .record import ConvergenceRecord

__all__ = ["IterateState", "unwrapped_admm", "residuals"]


@dataclass
class IterateState:
    """Snapshot of the splitting variables after ``k`` completed iterations."""

    x: np.ndarray
    ys: list
    lams: list
    ys_prev: list | None
    k: int


def _stacked_norm_sq(vectors):
    return sum(float(v @ v) for v in vectors)


def residuals(state, problem, tau, eps_rel=1e-3, eps_abs=1e-6):
    """Primal/dual residuals and their stopping thresholds (serial).

    ``primal = ||Dx - y||`` and ``dual = tau * ||D'(y_k - y_{k-1})||``; the
    thresholds are the norm-scaled pair
    ``eps_primal = sqrt(m)*eps_abs + eps_rel*max(||Dx||, ||y||)`` and
    ``eps_dual = sqrt(n)*eps_abs + eps_rel*||tau * D' lambda||``.  The dual
    residual is undefined before the first iteration and reported as
    infinity.

    Returns ``(primal, dual, (eps_primal, eps_dual))``.
    """
    shards = problem.shards
    fits = [s.data @ state.x for s in shards]
    primal = np.sqrt(_stacked_norm_sq([f - y for f, y in zip(fits, state.ys)]))
    if state.ys_prev is None:
        dual = np.inf
    else:
        change = np.zeros(problem.n_features)
        for s, y_new, y_old in zip(shards, state.ys, state.ys_prev):
            change += s.data.T @ (y_new - y_old)
        dual = tau * np.linalg.norm(change)
    lam_pull = np.zeros(problem.n_features)
    for s, lam in zip(shards, state.lams):
        lam_pull += s.data.T @ lam
    fit_norm = np.sqrt(_stacked_norm_sq(fits))
    y_norm = np.sqrt(_stacked_norm_sq(state.ys))
    eps_primal = np.sqrt(problem.total_rows) * eps_abs + eps_rel * max(fit_norm, y_norm)
    eps_dual = (np.sqrt(problem.n_features) * eps_abs
                + eps_rel * tau * np.linalg.norm(lam_pull))
    return primal, dual, (eps_primal, eps_dual)


def _thresholds(m, n, cfg, scale_primal, scale_dual):
    eps_primal = np.sqrt(m) * cfg.eps_abs + cfg.eps_rel * scale_primal
    eps_dual = np.sqrt(n) * cfg.eps_abs + cfg.eps_rel * scale_dual
    return eps_primal, eps_dual


def unwrapped_admm(problem, cluster, cfg):
    """Solve a row-sharded problem by splitting the fit vector off the model.

    Parameters
    ----------
    problem : ProblemSpec
        Row-sharded.  l1-penalized kinds must be augmented first (see
        ``augment_sparse``); column-sharded lasso must be dualized.
    cluster : Cluster
        Spawned from ``problem.shards`` (one worker per shard).
    cfg : SolverConfig

    Returns
    -------
    (x, ConvergenceRecord)
        ``record.final_state`` keeps the full iterate state; when
        ``cfg.record_iterates`` is set, ``record.iterates`` holds a copy of
        the model vector after every iteration.
    """
    cfg.validate()
    if problem.sharding != "rows":
        raise ValueError("unwrapped_admm needs a row-sharded problem; dualize columns first")
    if problem.kind in ("lasso", "sparse_logistic") and not problem.augmented:
        raise ValueError(f"{problem.kind} must pass through augment_sparse before this solver")
    if cluster.n_workers != problem.n_shards:
        raise ValueError(f"cluster has {cluster.n_workers} workers for {problem.n_shards} shards")

    n = problem.n_features
    m = problem.total_rows
    tau = cfg.effective_tau(m)
    delta = 1.0 / tau

    # --- setup: one Gram reduction, factorized once -------------------------
    t_setup = time.perf_counter()
    parts = cluster.all_execute(lambda w: gram_accumulate(w.data))
    cluster.account_upload(sum(p.gram.nbytes for p in parts))
    gram_total = parts[0].gram.copy()
    for p in parts[1:]:
        gram_total += p.gram
    if problem.quadratic_model_term > 0.0:
        # an explicit 0.5*||x||^2 model term shifts the normal equations
        system = gram_reduce(parts, ridge=problem.quadratic_model_term / tau)
    else:
        system = gram_reduce_auto(parts)

    table = None
    if cfg.use_lookup and problem.kind in ("logistic", "sparse_logistic"):
        table = build_lookup("logistic", delta)
    proxes = [problem.shard_prox(i, table=table) for i in range(problem.n_shards)]

    warm = cfg.warm_start
    for w in cluster.workers:
        rows = w.shard.rows
        if warm is not None:
            w.state["y"] = np.array(warm.ys[w.index], dtype=np.float64)
            w.state["lam"] = np.array(warm.lams[w.index], dtype=np.float64)
        else:
            w.state["y"] = np.zeros(rows)
            w.state["lam"] = np.zeros(rows)

    record = ConvergenceRecord(meta={
        "solver": "unwrapped",
        "problem": problem.kind,
        "m": m,
        "n": n,
        "n_workers": cluster.n_workers,
        "tau": tau,
        "seed": cfg.seed,
        "eps_rel": cfg.eps_rel,
        "eps_abs": cfg.eps_abs,
        "max_iter": cfg.max_iter,
        "augmented": problem.augmented,
    })
    if problem.mu is not None:
        record.meta["mu"] = problem.mu
    if problem.weight is not None:
        record.meta["hinge_weight"] = problem.weight
    if problem.grad_lipschitz is not None:
        rho = spectral_radius(gram_total)
        record.meta["rho_gram"] = rho
        record.meta["grad_lipschitz"] = problem.grad_lipschitz
        record.meta["bound_constant"] = (problem.grad_lipschitz + tau) ** 2 * rho
    if cfg.record_iterates:
        record.iterates = []
    record.meta["setup_bytes_up"] = cluster.counters.bytes_up
    record.meta["setup_bytes_down"] = cluster.counters.bytes_down
    record.meta["setup_seconds"] = time.perf_counter() - t_setup

    def pull_residual(worker):
        st = worker.state
        return worker.data.T @ (st["y"] - st["lam"])

    def local_update(worker):
        st = worker.state
        fit = worker.data @ worker.x
        y_old = st["y"]
        y_new = proxes[worker.index].prox(fit + st["lam"], delta)
        st["lam"] = st["lam"] + fit - y_new
        st["y"] = y_new
        st["y_prev"] = y_old
        st["fit"] = fit

    def diagnostics(worker):
        st = worker.state
        prox_i = proxes[worker.index]
        fit, y_new, y_old = st["fit"], st["y"], st["y_prev"]
        gap = fit - y_new
        delta_y = y_new - y_old
        out = {
            "loss": prox_i.value(fit),
            "fit_gap_sq": float(gap @ gap),
            "y_change_sq": float(delta_y @ delta_y),
            "fit_sq": float(fit @ fit),
            "y_sq": float(y_new @ y_new),
            "dual_vec": worker.data.T @ delta_y,
            "lam_vec": worker.data.T @ st["lam"],
        }
        if prox_i.differentiable:
            out["grad_vec"] = worker.data.T @ prox_i.grad(fit)
        return out

    status = "max_iter"
    x = np.zeros(n)
    base_counters = cluster.counters.snapshot()
    for k in range(1, cfg.max_iter + 1):
        t_iter = time.perf_counter()

        pulled = cluster.all_execute(pull_residual)
        # The modeled upstream transfer for the global x-update is the
        # stacked residual y - lambda (one entry per row); its transpose
        # reduction is what physically moves here.
        reduced = cluster.reduce_sum(pulled, counted_nbytes=8 * m)
        x = solve_spd(system, reduced.payload)
        cluster.broadcast(x)
        cluster.all_execute(local_update)

        diag = cluster.all_execute(diagnostics, diagnostic=True)
        primal_sq = sum(d["fit_gap_sq"] for d in diag)
        dual_vec = cluster.reduce_sum([d["dual_vec"] for d in diag], counted_nbytes=0)
        lam_vec = cluster.reduce_sum([d["lam_vec"] for d in diag], counted_nbytes=0)
        primal = np.sqrt(primal_sq)
        dual = tau * np.linalg.norm(dual_vec.payload)
        scale_primal = max(np.sqrt(sum(d["fit_sq"] for d in diag)),
                           np.sqrt(sum(d["y_sq"] for d in diag)))
        scale_dual = tau * np.linalg.norm(lam_vec.payload)
        eps_primal, eps_dual = _thresholds(m, n, cfg, scale_primal, scale_dual)

        objective = sum(d["loss"] for d in diag)
        if problem.quadratic_model_term > 0.0:
            objective += 0.5 * problem.quadratic_model_term * float(x @ x)
        grad_norm_sq = float("nan")
        if problem.grad_lipschitz is not None:
            grad_vec = cluster.reduce_sum([d["grad_vec"] for d in diag], counted_nbytes=0)
            grad_norm_sq = float(grad_vec.payload @ grad_vec.payload)

        up, down, compute, barrier = cluster.counters.snapshot()
        record.add_row(
            k=k,
            wall_s=time.perf_counter() - t_iter,
            compute_s=compute - base_counters[2],
            barrier_s=barrier - base_counters[3],
            objective=objective,
            primal_residual=primal,
            dual_residual=dual,
            eps_primal=eps_primal,
            eps_dual=eps_dual,
            grad_norm_sq=grad_norm_sq,
            y_change_sq=sum(d["y_change_sq"] for d in diag),
            fit_gap_sq=primal_sq,
            bytes_up=up - base_counters[0],
            bytes_down=down - base_counters[1],
            inner_iterations=0,
        )
        base_counters = cluster.counters.snapshot()
        if record.iterates is not None:
            record.iterates.append(x.copy())

        if primal <= eps_primal and dual <= eps_dual:
            status = "converged"
            break

    record.meta["status"] = status
    record.meta["iterations"] = record.iterations
    record.meta["final_objective"] = record.column("objective")[-1] if record.rows else float("nan")
    record.final_state = IterateState(
        x=x.copy(),
        ys=[w.state["y"].copy() for w in cluster.workers],
        lams=[w.state["lam"].copy() for w in cluster.workers],
        ys_prev=[w.state["y_prev"].copy() for w in cluster.workers] if record.rows else None,
        k=record.iterations,
    )
    return x, record

"""Consensus baseline: every worker fits its own model copy, tied to a
global average.

Each iteration the workers solve a full local model sub-problem (closed form
for quadratic fits, limited-memory BFGS for logistic, dual coordinate
descent for hinge), ship ``x_i + lambda_i`` to the driver, and receive the
updated global vector back.  Per-iteration traffic therefore grows with the
model dimension times the worker count, in contrast to the row-split solver.

Sub-solvers are warm-started from the previous iterate.  A sub-solver that
exhausts its inner budget does not abort the run; the step is taken anyway
and counted in the ``inexact_steps`` metadata.
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .inner import (LogisticRegressionOracle, RidgedOracle, lbfgs_solve,
                    svm_dual_cd)
from .linalg import gram_accumulate, gram_reduce, solve_spd
from .prox import logistic_value, soft_threshold
from .record import ConvergenceRecord

__all__ = ["ConsensusState", "consensus_admm", "z_update"]

_SUPPORTED = ("least_squares", "lasso", "logistic", "sparse_logistic", "svm")


@dataclass
class ConsensusState:
    """Per-worker model copies and multipliers plus the global vector."""

    xs: list
    lams: list
    z: np.ndarray
    k: int


def _center_from_mean(mean_vec, loss_kind, tau, n_workers, mu=None, bias_col=None):
    """Global update from the average of ``x_i + lambda_i``."""
    if loss_kind in ("lasso", "sparse_logistic"):
        if mu is None:
            raise ValueError("l1-penalized center update needs mu")
        return soft_threshold(mean_vec, mu / (n_workers * tau))
    if loss_kind == "svm_center_l2":
        shrink = n_workers * tau / (1.0 + n_workers * tau)
        z = shrink * mean_vec
        if bias_col is not None:
            z[bias_col] = mean_vec[bias_col]
        return z
    return mean_vec.copy()


def z_update(xs, lams, loss_kind, tau, n_workers, mu=None, bias_col=None):
    """Central update of the shared vector.

    With no global regularizer the minimizer of the quadratic coupling is
    the plain average of ``x_i + lambda_i``.  A global l1 penalty turns it
    into a soft threshold at ``mu/(N*tau)``; assigning ``0.5*||z||^2`` to
    the center (``loss_kind="svm_center_l2"``) shrinks the average by
    ``N*tau/(1+N*tau)`` with the bias coordinate exempt.
    """
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    xs = [np.asarray(x, dtype=np.float64) for x in xs]
    lams = [np.asarray(l, dtype=np.float64) for l in lams]
    total = xs[0] + lams[0]
    for x, lam in zip(xs[1:], lams[1:]):
        total = total + x + lam
    return _center_from_mean(total / n_workers, loss_kind, tau, n_workers,
                             mu=mu, bias_col=bias_col)


def consensus_admm(problem, cluster, cfg):
    """Fit a row-sharded problem with one model copy per worker.

    Supports least-squares, lasso, logistic, sparse-logistic, and hinge
    losses.  The reported objective is always the canonical one (the model
    regularizer counted once); note that the hinge sub-problems each carry
    their own ``0.5*||w||^2`` term, so with several workers the fixed point
    weights the regularizer once per worker.

    Returns ``(z, record)``; ``record.final_state`` is a ConsensusState.
    """
    cfg.validate()
    if problem.sharding != "rows":
        raise ValueError("consensus_admm needs a row-sharded problem")
    if problem.kind not in _SUPPORTED:
        raise ValueError(f"consensus_admm does not support problem kind {problem.kind!r}")
    if problem.augmented:
        raise ValueError("consensus_admm takes the unaugmented problem; the penalty "
                         "lives in the central update")
    if cluster.n_workers != problem.n_shards:
        raise ValueError(f"cluster has {cluster.n_workers} workers for {problem.n_shards} shards")

    n = problem.n_features
    m = problem.total_rows
    n_workers = cluster.n_workers
    tau = cfg.effective_tau(m)
    kind = problem.kind

    t_setup = time.perf_counter()
    quadratic = kind in ("least_squares", "lasso")
    if quadratic:
        # cache one shifted Cholesky per worker; reused every iteration
        def setup(worker):
            contrib = gram_accumulate(worker.data, worker.targets)
            worker.state["system"] = gram_reduce([contrib], ridge=tau)
            worker.state["rhs"] = contrib.rhs

        cluster.all_execute(setup)

    warm = cfg.warm_start
    for w in cluster.workers:
        if warm is not None:
            w.state["x"] = np.array(warm.xs[w.index], dtype=np.float64)
            w.state["lam"] = np.array(warm.lams[w.index], dtype=np.float64)
        else:
            w.state["x"] = np.zeros(n)
            w.state["lam"] = np.zeros(n)
    z = np.zeros(n) if warm is None else np.array(warm.z, dtype=np.float64)
    cluster.broadcast(z)  # workers read the standing global vector each round

    record = ConvergenceRecord(meta={
        "solver": "consensus",
        "problem": kind,
        "m": m,
        "n": n,
        "n_workers": n_workers,
        "tau": tau,
        "seed": cfg.seed,
        "eps_rel": cfg.eps_rel,
        "eps_abs": cfg.eps_abs,
        "max_iter": cfg.max_iter,
    })
    if problem.mu is not None:
        record.meta["mu"] = problem.mu
    if problem.weight is not None:
        record.meta["hinge_weight"] = problem.weight
    if cfg.record_iterates:
        record.iterates = []
    record.meta["setup_bytes_up"] = cluster.counters.bytes_up
    record.meta["setup_bytes_down"] = cluster.counters.bytes_down
    record.meta["setup_seconds"] = time.perf_counter() - t_setup

    def local_fit(worker):
        st = worker.state
        center = worker.x - st["lam"]
        if quadratic:
            st["x"] = solve_spd(st["system"], st["rhs"] + tau * center)
            return 1, True
        if kind in ("logistic", "sparse_logistic"):
            oracle = RidgedOracle(LogisticRegressionOracle(worker.data, worker.targets),
                                  tau, center)
            result = lbfgs_solve(oracle, st["x"], tol=cfg.inner_tol,
                                 max_iter=cfg.inner_max_iter)
            st["x"] = result.x
            return result.iterations, result.converged
        # hinge: box dual, warm-started with the previous multipliers
        w_new, dual_state = svm_dual_cd(worker.data, worker.targets, problem.weight,
                                        tau, center, warm=st.get("dual"),
                                        tol=cfg.inner_tol, max_passes=cfg.inner_max_iter)
        st["x"] = w_new
        st["dual"] = dual_state
        return dual_state.n_passes, dual_state.converged

    def push_consensus(worker):
        st = worker.state
        return st["x"] + st["lam"]

    def pull_multiplier(worker):
        st = worker.state
        st["lam"] = st["lam"] + st["x"] - worker.x

    def diagnostics(worker):
        st = worker.state
        x = st["x"]
        gap = x - worker.x
        out = {
            "gap_sq": float(gap @ gap),
            "x_sq": float(x @ x),
            "lam_sq": float(st["lam"] @ st["lam"]),
            "loss": _local_loss(problem, worker),
        }
        if kind in ("least_squares", "logistic"):
            out["grad_vec"] = _local_grad(problem, worker)
        return out

    center_kind = kind
    status = "max_iter"
    inexact_steps = 0
    base_counters = cluster.counters.snapshot()
    for k in range(1, cfg.max_iter + 1):
        t_iter = time.perf_counter()

        fit_info = cluster.all_execute(local_fit)
        inner_total = sum(it for it, _ in fit_info)
        inexact_steps += sum(0 if ok else 1 for _, ok in fit_info)

        pushed = cluster.reduce_sum(cluster.all_execute(push_consensus))
        z_prev = z
        z = _center_from_mean(pushed.payload / n_workers, center_kind, tau,
                              n_workers, mu=problem.mu, bias_col=problem.bias_col)
        cluster.broadcast(z)
        cluster.all_execute(pull_multiplier)

        diag = cluster.all_execute(diagnostics, diagnostic=True)
        primal = np.sqrt(sum(d["gap_sq"] for d in diag))
        dual = tau * np.sqrt(n_workers) * np.linalg.norm(z - z_prev)
        scale_primal = max(np.sqrt(sum(d["x_sq"] for d in diag)),
                           np.sqrt(n_workers) * np.linalg.norm(z))
        scale_dual = tau * np.sqrt(sum(d["lam_sq"] for d in diag))
        stacked = np.sqrt(n_workers * n)
        eps_primal = stacked * cfg.eps_abs + cfg.eps_rel * scale_primal
        eps_dual = stacked * cfg.eps_abs + cfg.eps_rel * scale_dual

        objective = sum(d["loss"] for d in diag)
        if kind in ("lasso", "sparse_logistic"):
            objective += problem.mu * float(np.sum(np.abs(z)))
        elif kind == "svm":
            objective += 0.5 * float(z @ z)
        grad_norm_sq = float("nan")
        if kind in ("least_squares", "logistic"):
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
            y_change_sq=float("nan"),
            fit_gap_sq=float("nan"),
            bytes_up=up - base_counters[0],
            bytes_down=down - base_counters[1],
            inner_iterations=inner_total,
        )
        base_counters = cluster.counters.snapshot()
        if record.iterates is not None:
            record.iterates.append(z.copy())

        if primal <= eps_primal and dual <= eps_dual:
            status = "converged"
            break

    if inexact_steps:
        warnings.warn(f"{inexact_steps} consensus sub-solves hit their inner budget",
                      RuntimeWarning, stacklevel=2)
    record.meta["status"] = status
    record.meta["iterations"] = record.iterations
    record.meta["inexact_steps"] = inexact_steps
    record.meta["final_objective"] = record.column("objective")[-1] if record.rows else float("nan")
    record.final_state = ConsensusState(
        xs=[w.state["x"].copy() for w in cluster.workers],
        lams=[w.state["lam"].copy() for w in cluster.workers],
        z=z.copy(),
        k=record.iterations,
    )
    return z, record


def _local_loss(problem, worker):
    """This worker's share of the canonical objective, evaluated at z."""
    z = worker.x
    fit = worker.data @ z
    kind = problem.kind
    if kind in ("least_squares", "lasso"):
        resid = fit - worker.targets
        return 0.5 * float(resid @ resid)
    if kind in ("logistic", "sparse_logistic"):
        return float(np.sum(logistic_value(worker.targets * fit)))
    return problem.weight * float(np.sum(np.maximum(1.0 - worker.targets * fit, 0.0)))


def _local_grad(problem, worker):
    from scipy.special import expit

    z = worker.x
    fit = worker.data @ z
    if problem.kind == "least_squares":
        return worker.data.T @ (fit - worker.targets)
    return worker.data.T @ (-worker.targets * expit(-worker.targets * fit))

"""Empirical verification of the solver's worst-case convergence rates.

Two certified decay laws are checked against an actual run of the
row-split solver, both of the 1/k family:

* the squared step-plus-infeasibility quantity
  ``||y^k - y^{k-1}||^2 + ||Dx^k - y^k||^2`` is bounded by ``B/k`` where
  ``B = ||y^0 - Dx*||^2 + ||lam^0 - lam*||^2``;
* for differentiable losses, ``||D^T grad f(Dx^k)||^2`` is bounded by
  ``C*B/k`` with ``C = (L + tau)^2 * rho(D^T D)`` and ``L`` the gradient's
  Lipschitz constant.

The fixed point ``(x*, lam*)`` comes from a tightly converged reference
run; a second run from the zero start then logs every left-hand side.
Constants use the multiplier in the algorithm's own scaling, so run these
checks at ``tau = 1`` where the two conventions coincide.
"""

from dataclasses import dataclass, replace

import numpy as np

from .cluster import spawn
from .problems import SolverConfig
from .unwrapped import unwrapped_admm

__all__ = ["RateReport", "check_rate_bounds"]


@dataclass
class RateReport:
    """Outcome of the rate verification.

    Ratios are left-hand side over bound, per logged iteration; a check
    passes when its largest ratio stays at or below the slack.
    """

    bound_constant: float
    curvature_constant: float
    slack: float
    step_ratios: np.ndarray
    gradient_ratios: np.ndarray
    step_pass: bool
    gradient_pass: bool
    reference_iterations: int
    logged_iterations: int

    @property
    def passed(self):
        return self.step_pass and self.gradient_pass


def _ratios(lhs, bounds):
    lhs = np.asarray(lhs, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.float64)
    out = np.full(lhs.shape, np.inf)
    ok = bounds > 0
    out[ok] = lhs[ok] / bounds[ok]
    out[~ok & (lhs == 0.0)] = 0.0
    return out


def check_rate_bounds(problem, cfg=None, slack=1.05, horizon=300,
                      gradient_check=None, ref_tol=1e-12, ref_max_iter=50000):
    """Run the row-split solver twice and test both decay laws.

    Parameters
    ----------
    problem : ProblemSpec
        Row-sharded, without a model-side quadratic term (the step bound
        is stated for pure data-fitting splits).
    cfg : SolverConfig, optional
        Step parameter and seed for both runs; defaults to tau=1.
    slack : float
        Multiplicative tolerance on each bound.
    horizon : int
        Iterations logged by the measurement run.
    gradient_check : bool, optional
        Default: checked exactly when the loss is differentiable.
        Requesting it for a nonsmooth loss is an error.

    Returns
    -------
    RateReport
    """
    if problem.sharding != "rows":
        raise ValueError("rate checks need a row-sharded problem")
    if problem.quadratic_model_term != 0.0:
        raise ValueError("rate checks cover pure data-fitting splits only")
    differentiable = problem.grad_lipschitz is not None
    if gradient_check is None:
        gradient_check = differentiable
    elif gradient_check and not differentiable:
        raise ValueError(f"gradient decay is undefined for {problem.kind!r}")
    cfg = cfg if cfg is not None else SolverConfig()
    cfg.validate()

    ref_cfg = replace(cfg, eps_rel=ref_tol, eps_abs=ref_tol, max_iter=ref_max_iter,
                      record_iterates=False, warm_start=None)
    with spawn(problem.shards) as cluster:
        x_star, ref_record = unwrapped_admm(problem, cluster, ref_cfg)
    state = ref_record.final_state
    fit_sq = sum(float((s.data @ x_star) @ (s.data @ x_star)) for s in problem.shards)
    lam_sq = sum(float(l @ l) for l in state.lams)
    bound_constant = fit_sq + lam_sq  # zero start: y^0 = 0, lam^0 = 0

    log_cfg = replace(cfg, eps_rel=1e-14, eps_abs=1e-14, max_iter=horizon,
                      record_iterates=False, warm_start=None)
    with spawn(problem.shards) as cluster:
        _, log_record = unwrapped_admm(problem, cluster, log_cfg)

    ks = np.asarray(log_record.column("k"), dtype=np.float64)
    step_lhs = (np.asarray(log_record.column("y_change_sq"))
                + np.asarray(log_record.column("fit_gap_sq")))
    step_ratios = _ratios(step_lhs, bound_constant / ks)
    step_pass = bool(np.all(step_ratios <= slack))

    gradient_ratios = np.array([])
    gradient_pass = True
    curvature = float("nan")
    if gradient_check:
        curvature = log_record.meta["bound_constant"]
        grad_lhs = np.asarray(log_record.column("grad_norm_sq"))
        gradient_ratios = _ratios(grad_lhs, curvature * bound_constant / ks)
        gradient_pass = bool(np.all(gradient_ratios <= slack))

    return RateReport(
        bound_constant=bound_constant,
        curvature_constant=curvature,
        slack=slack,
        step_ratios=step_ratios,
        gradient_ratios=gradient_ratios,
        step_pass=step_pass,
        gradient_pass=gradient_pass,
        reference_iterations=ref_record.iterations,
        logged_iterations=int(ks[-1]) if ks.size else 0,
    )

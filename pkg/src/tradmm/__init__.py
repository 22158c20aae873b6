"""Distributed model fitting by transpose reduction.

Two solver families over an in-process cluster emulator: a row-split
method whose per-iteration traffic is independent of the feature count,
and the classical per-node-model consensus baseline.  A one-shot lasso
pipeline, synthetic data generators, and convergence-rate verification
round out the toolkit; the ``tradmm`` console script drives all of it.
"""

from .bounds import RateReport, check_rate_bounds
from .cluster import Cluster, CommCounters, Shard, Worker, spawn
from .consensus import ConsensusState, consensus_admm, z_update
from .data import (SyntheticRecipe, append_bias_column, gen_classification,
                   gen_lasso, heterogenize, load_dataset, partition_cols,
                   partition_rows, save_dataset)
from .inner import (DualSvmState, LogisticRegressionOracle, QuadraticOracle,
                    RidgedOracle, SolveResult, fbs_solve, lbfgs_solve,
                    svm_dual_cd)
from .linalg import (GramContribution, GramSystem, SingularGramError,
                     gram_accumulate, gram_reduce, gram_reduce_auto, matvec,
                     solve_spd, spectral_radius)
from .problems import (ProblemSpec, SolverConfig, augment_sparse,
                       dualize_columns, lasso_columns_problem, lasso_problem,
                       least_squares_problem, logistic_problem,
                       sparse_logistic_problem, svm_problem)
from .prox import (HingeProx, IdentityProx, L1Prox, LinfBallProx,
                   LogisticProx, ProxLookupTable, QuadraticProx,
                   build_lookup, eval_lookup, project_linf, prox_hinge,
                   prox_l1, prox_logistic, prox_quadratic, soft_threshold)
from .record import ConvergenceRecord, read_csv, strip_timing
from .translasso import dual_lasso_report, lasso_objective, transpose_lasso
from .unwrapped import IterateState, residuals, unwrapped_admm

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # cluster emulator
    "Cluster", "CommCounters", "Shard", "Worker", "spawn",
    # linear algebra
    "GramContribution", "GramSystem", "SingularGramError", "gram_accumulate",
    "gram_reduce", "gram_reduce_auto", "matvec", "solve_spd", "spectral_radius",
    # proximal operators
    "HingeProx", "IdentityProx", "L1Prox", "LinfBallProx", "LogisticProx",
    "ProxLookupTable", "QuadraticProx", "build_lookup", "eval_lookup",
    "project_linf", "prox_hinge", "prox_l1", "prox_logistic",
    "prox_quadratic", "soft_threshold",
    # inner solvers
    "DualSvmState", "LogisticRegressionOracle", "QuadraticOracle", "RidgedOracle",
    "SolveResult", "fbs_solve", "lbfgs_solve", "svm_dual_cd",
    # problem descriptions
    "ProblemSpec", "SolverConfig", "augment_sparse", "dualize_columns",
    "lasso_columns_problem", "lasso_problem", "least_squares_problem",
    "logistic_problem", "sparse_logistic_problem", "svm_problem",
    # solvers
    "IterateState", "residuals", "unwrapped_admm",
    "ConsensusState", "consensus_admm", "z_update",
    "dual_lasso_report", "lasso_objective", "transpose_lasso",
    # rate verification
    "RateReport", "check_rate_bounds",
    # data and records
    "SyntheticRecipe", "append_bias_column", "gen_classification", "gen_lasso",
    "heterogenize", "load_dataset", "partition_cols", "partition_rows",
    "save_dataset", "ConvergenceRecord", "read_csv", "strip_timing",
]

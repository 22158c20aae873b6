"""Command-line front end.

Subcommands: ``gen`` writes synthetic datasets, ``solve`` runs one solver
family on one problem, ``compare`` runs both families on identical data,
and ``ratecheck`` verifies the 1/k decay guarantees on a generated
instance.  Exit codes: 0 converged (or check passed), 2 iteration budget
exhausted, 1 runtime error, 64 bad usage.
"""

import argparse
import csv
import os
import sys
import tempfile
import time

import numpy as np

from .bounds import check_rate_bounds
from .cluster import Shard, spawn
from .consensus import consensus_admm
from .data import (SyntheticRecipe, gen_classification, gen_lasso, heterogenize,
                   load_dataset, partition_cols, partition_rows, save_dataset)
from .problems import (SolverConfig, augment_sparse, dualize_columns,
                       lasso_columns_problem, lasso_problem,
                       least_squares_problem, logistic_problem,
                       sparse_logistic_problem, svm_problem)
from .translasso import dual_lasso_report, transpose_lasso
from .unwrapped import unwrapped_admm

__all__ = ["main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_ITER = 2
EXIT_USAGE = 64

_PROBLEMS = ("lasso", "logistic", "svm", "sparse-logistic", "dual-lasso",
             "least-squares")
_CLASSIFICATION = ("logistic", "svm", "sparse-logistic")


class _Parser(argparse.ArgumentParser):
    # argparse defaults to exit code 2, which we reserve for max_iter
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _tau_ref(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected ROWS:TAU, e.g. 10000:0.5")
    try:
        rows, tau = float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric tau reference {text!r}")
    if rows <= 0 or tau <= 0:
        raise argparse.ArgumentTypeError("tau reference values must be positive")
    return rows, tau


def _build_parser():
    top = _Parser(prog="tradmm", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    data_flags = _Parser(add_help=False)
    data_flags.add_argument("--m", type=int, help="total rows of the design matrix")
    data_flags.add_argument("--n", type=int, default=50, help="feature count")
    data_flags.add_argument("--nodes", type=int, default=1, help="worker count")
    data_flags.add_argument("--per-node", type=int, dest="per_node",
                            help="rows per worker (alternative to --m)")
    data_flags.add_argument("--seed", type=int, default=0)
    data_flags.add_argument("--hetero", action="store_true",
                            help="shift each shard by its own random scalar")
    data_flags.add_argument("--data", help="load a dataset file instead of generating")

    solve_flags = _Parser(add_help=False)
    solve_flags.add_argument("--tau", type=float,
                             help="quadratic coupling weight (default 1)")
    solve_flags.add_argument("--tau-ref", type=_tau_ref, dest="tau_ref", metavar="ROWS:TAU",
                             help="scale tau proportionally from a tuned reference size")
    solve_flags.add_argument("--mu", type=float, help="l1 weight (default: ten-percent rule)")
    solve_flags.add_argument("--C", type=float, default=1.0, help="hinge loss weight")
    solve_flags.add_argument("--eps-rel", type=float, default=1e-3, dest="eps_rel")
    solve_flags.add_argument("--eps-abs", type=float, default=1e-6, dest="eps_abs")
    solve_flags.add_argument("--max-iter", type=int, default=5000, dest="max_iter")
    solve_flags.add_argument("--lookup", action="store_true",
                             help="tabulated logistic prox instead of per-call Newton")
    solve_flags.add_argument("--out", help="write the convergence record CSV here")

    p_solve = sub.add_parser("solve", parents=[data_flags, solve_flags],
                             help="run one solver on one problem")
    p_solve.add_argument("--problem", choices=_PROBLEMS, required=True)
    p_solve.add_argument("--method", choices=("transpose", "consensus"),
                         default="transpose")
    p_solve.set_defaults(func=cmd_solve)

    p_cmp = sub.add_parser("compare", parents=[data_flags, solve_flags],
                           help="run both solver families on identical data")
    p_cmp.add_argument("--problem", choices=_PROBLEMS, required=True)
    p_cmp.set_defaults(func=cmd_compare)

    p_rate = sub.add_parser("ratecheck", parents=[data_flags, solve_flags],
                            help="verify the 1/k decay bounds on a generated instance")
    p_rate.add_argument("--problem", choices=("least-squares", "logistic", "lasso"),
                        default="least-squares")
    p_rate.add_argument("--slack", type=float, default=1.05)
    p_rate.add_argument("--horizon", type=int, default=300,
                        help="iterations logged by the measurement run")
    p_rate.add_argument("--gradient", action="store_true",
                        help="force the gradient-decay check (errors on nonsmooth losses)")
    p_rate.set_defaults(func=cmd_ratecheck)

    p_gen = sub.add_parser("gen", parents=[data_flags],
                           help="generate a synthetic dataset file")
    p_gen.add_argument("--problem", choices=("lasso", "classification"), required=True)
    p_gen.add_argument("--sparsity", type=int, default=None,
                       help="active features in x_true (default: 10, capped at n)")
    p_gen.add_argument("--noise-sigma", type=float, default=1.0, dest="noise_sigma")
    p_gen.add_argument("--format", choices=("binary", "text"), default="binary")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)
    return top


# --- problem assembly -------------------------------------------------------


def _rows(args, parser):
    if args.m is not None and args.per_node is not None:
        parser.error("--m and --per-node are mutually exclusive")
    if args.m is not None:
        return args.m
    if args.per_node is not None:
        return args.per_node * args.nodes
    return None


def _load_or_generate(args, parser):
    """Dataset for the requested problem: (D, targets, mu_default)."""
    classification = args.problem in _CLASSIFICATION
    if args.data:
        D, targets = load_dataset(args.data)
        if targets is None:
            parser.error(f"dataset {args.data} carries no target vector")
        return D, targets, None
    m = _rows(args, parser)
    if m is None:
        parser.error("need --m, --per-node, or --data")
    if classification:
        recipe = SyntheticRecipe(kind="classification", m=m, n=args.n,
                                 seed=args.seed, sparsity=0)
        D, labels = gen_classification(recipe)
        return D, labels, None
    # ten active features by default, fewer when the dimension is smaller
    recipe = SyntheticRecipe(kind="lasso", m=m, n=args.n, seed=args.seed,
                             sparsity=min(10, args.n))
    D, b, _, mu = gen_lasso(recipe)
    return D, b, mu


def _ten_percent_mu(shards):
    """l1 weight from the zero-solution threshold of the sharded data."""
    corr = sum(s.data.T @ s.targets for s in shards)
    return 0.1 * float(np.max(np.abs(corr)))


def _assemble(args, parser):
    """Build (problem, mu) from flags; row-sharded except dual-lasso input."""
    D, targets, mu_default = _load_or_generate(args, parser)
    if args.nodes < 1:
        parser.error("--nodes must be at least 1")

    if args.problem == "dual-lasso":
        blocks = partition_cols(D, args.nodes)
        mu = args.mu if args.mu is not None else mu_default
        if mu is None:
            mu = 0.1 * float(np.max(np.abs(D.T @ targets)))
        if args.hetero:
            parser.error("--hetero applies to row-sharded problems")
        return dualize_columns(lasso_columns_problem(blocks, targets, mu)), mu

    shards = partition_rows(D, targets, args.nodes)
    if args.hetero:
        shards = heterogenize(shards, args.seed)

    if args.problem == "least-squares":
        return least_squares_problem(shards), None
    if args.problem == "logistic":
        return logistic_problem(shards), None
    if args.problem == "svm":
        return svm_problem(shards, weight=args.C), None
    # l1 families: the ten-percent rule uses the matrix actually solved,
    # so recompute after a heterogeneous shift
    if args.mu is not None:
        mu = args.mu
    elif args.problem == "lasso" and not args.hetero and mu_default is not None:
        mu = mu_default
    elif args.problem == "lasso":
        mu = _ten_percent_mu(shards)
    else:
        # zero-solution threshold of l1 logistic is half the correlation peak
        mu = 0.05 * float(np.max(np.abs(sum(s.data.T @ s.targets for s in shards))))
    if mu <= 0:
        parser.error("mu must be positive for l1 problems")
    if args.problem == "lasso":
        return lasso_problem(shards, mu), mu
    return sparse_logistic_problem(shards, mu), mu


def _config(args):
    tau = 1.0
    tau_ref = None
    if args.tau is not None:
        tau = args.tau
    elif args.tau_ref is not None:
        tau_ref = args.tau_ref
    return SolverConfig(tau=tau, eps_rel=args.eps_rel, eps_abs=args.eps_abs,
                        max_iter=args.max_iter, seed=args.seed, tau_ref=tau_ref,
                        use_lookup=args.lookup)


def _run_method(method, problem, cfg):
    """Dispatch one solver family; returns (x, record)."""
    if method == "transpose":
        if problem.kind == "lasso" and not problem.augmented:
            b_shards = [s.targets for s in problem.shards]
            with spawn([Shard(s.data, None) for s in problem.shards]) as cluster:
                return transpose_lasso(cluster, b_shards, problem.mu, cfg)
        run_problem = problem
        if problem.kind == "sparse_logistic" and not problem.augmented:
            run_problem = augment_sparse(problem, problem.mu)
        with spawn(run_problem.shards) as cluster:
            return unwrapped_admm(run_problem, cluster, cfg)
    if problem.kind == "dual_lasso":
        raise ValueError("the dual lasso rewrite has no consensus form; "
                         "use --method transpose")
    with spawn(problem.shards) as cluster:
        return consensus_admm(problem, cluster, cfg)


def _summary_line(record):
    status = record.meta.get("status", "error")
    return (f"final_objective={record.meta.get('final_objective', float('nan')):.12e} "
            f"iterations={record.meta.get('iterations', 0)} status={status}")


def _exit_for(record):
    return EXIT_OK if record.meta.get("status") == "converged" else EXIT_MAX_ITER


# --- subcommands ------------------------------------------------------------


def cmd_solve(args, parser):
    problem, _ = _assemble(args, parser)
    if problem.kind == "dual_lasso" and args.method == "consensus":
        parser.error("--problem dual-lasso supports --method transpose only")
    cfg = _config(args)
    x, record = _run_method(args.method, problem, cfg)
    if problem.kind == "dual_lasso":
        report = dual_lasso_report(x, problem)
        record.meta["dual_objective"] = report["dual_objective"]
        record.meta["primal_objective_bound"] = report["primal_objective_bound"]
        record.meta["active_set_size"] = int(report["active_set"].size)
    if args.out:
        record.write_csv(args.out)
    print(_summary_line(record))
    return _exit_for(record)


def cmd_compare(args, parser):
    if args.problem == "dual-lasso":
        parser.error("compare needs a problem both families can solve")
    problem, _ = _assemble(args, parser)
    cfg = _config(args)

    rows = []
    worst = EXIT_OK
    for method in ("transpose", "consensus"):
        start = time.perf_counter()
        _, record = _run_method(method, problem, cfg)
        wall = time.perf_counter() - start
        compute = sum(record.column("compute_s")) + record.meta.get("setup_seconds", 0.0)
        rows.append({
            "method": method,
            "status": record.meta["status"],
            "iterations": record.meta["iterations"],
            "final_objective": record.meta["final_objective"],
            "wall_s": wall,
            "compute_s": compute,
            "bytes_up": int(sum(record.column("bytes_up"))
                            + record.meta.get("setup_bytes_up", 0)),
            "bytes_down": int(sum(record.column("bytes_down"))
                              + record.meta.get("setup_bytes_down", 0)),
        })
        worst = max(worst, _exit_for(record))
        print(f"{method}: {_summary_line(record)} wall_s={wall:.3f}")

    if args.out:
        meta = {
            "problem": args.problem,
            "m": problem.total_rows,
            "n": problem.n_features,
            "n_workers": problem.n_shards,
            "seed": args.seed,
            "hetero": args.hetero,
        }
        _write_table(args.out, meta, list(rows[0]), rows)
    return worst


def cmd_ratecheck(args, parser):
    problem, _ = _assemble(args, parser)
    if problem.kind == "lasso" and not problem.augmented:
        problem = augment_sparse(problem, problem.mu)
    cfg = _config(args)
    report = check_rate_bounds(problem, cfg, slack=args.slack, horizon=args.horizon,
                               gradient_check=True if args.gradient else None)
    print(f"bound_constant={report.bound_constant:.6e} "
          f"reference_iterations={report.reference_iterations}")
    step_max = float(np.max(report.step_ratios)) if report.step_ratios.size else 0.0
    print(f"step_decay: max_ratio={step_max:.6f} "
          f"{'pass' if report.step_pass else 'FAIL'} (slack {report.slack})")
    if report.gradient_ratios.size:
        grad_max = float(np.max(report.gradient_ratios))
        print(f"gradient_decay: max_ratio={grad_max:.6f} "
              f"{'pass' if report.gradient_pass else 'FAIL'} "
              f"(curvature constant {report.curvature_constant:.6e})")
    else:
        print("gradient_decay: skipped (nonsmooth loss)")
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_gen(args, parser):
    m = _rows(args, parser)
    if m is None:
        parser.error("gen needs --m or --per-node")
    sparsity = 0
    if args.problem == "lasso":
        sparsity = min(10, args.n) if args.sparsity is None else args.sparsity
    if sparsity > args.n:
        parser.error(f"--sparsity {sparsity} exceeds --n {args.n}")
    recipe = SyntheticRecipe(kind=args.problem, m=m, n=args.n, seed=args.seed,
                             sparsity=sparsity, noise_sigma=args.noise_sigma)
    if args.problem == "lasso":
        D, b, _, mu = gen_lasso(recipe)
        save_dataset(args.out, D, b, format=args.format)
        print(f"wrote {args.out}: {m}x{args.n} lasso, ten-percent mu={mu:.6e}")
    else:
        D, labels = gen_classification(recipe)
        save_dataset(args.out, D, labels, format=args.format)
        print(f"wrote {args.out}: {m}x{args.n} classification, balanced labels")
    return EXIT_OK


def _write_table(path, meta, header, rows):
    """Small CSV with a commented key=value preamble, written atomically."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".compare-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            for key in sorted(meta):
                fh.write(f"# {key}={meta[key]}\n")
            writer = csv.DictWriter(fh, fieldnames=header)
            writer.writeheader()
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except Exception as exc:  # runtime failure, distinct from usage errors
        print(f"tradmm: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end.

Subcommands
-----------
gen      sample a synthetic point cloud and write it to .csv or .json
solve    run one solver on a source/target pair, write a result JSON
bench    run all solvers on the same pair, print a timing table
cluster  run transport k-means, write assignments, centers and plots

Exit codes: 0 on success, 1 on bad input or arguments, 2 when a solver
finished without reaching its tolerance (the result file is still
written so the partial answer can be inspected).
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .brenier import BrenierConfig, NumericalError, solve
from .clustering import BARYCENTER, GRADIENT, ClusterConfig, cluster
from .datasets import make_gaussian_mixture, make_uniform
from .exact_lp import brute_force_solve, lp_solve
from .measures import DiscreteMeasure, cost_matrix, marginal_residuals
from .pointio import load_measure, result_payload, save_measure, save_measure_json, write_result
from .sinkhorn import SinkhornConfig, sinkhorn_solve
from .svg import save_scatter_svg

OK = 0
USAGE = 1
NOT_CONVERGED = 2

PLAN_PRINT_CELLS = 40


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a synthetic point cloud")
    gen.add_argument("--kind", choices=("mixture", "uniform"), default="mixture")
    gen.add_argument("--n", type=int, default=250)
    gen.add_argument("--dim", type=int, default=2)
    gen.add_argument("--components", type=int, default=5, help="mixture components")
    gen.add_argument("--sigma", type=float, default=1.0)
    gen.add_argument("--separation", type=float, default=None)
    gen.add_argument("--low", type=float, default=0.0)
    gen.add_argument("--high", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--output", required=True, help="output path, .csv or .json")
    gen.set_defaults(func=_cmd_gen)

    solve_p = sub.add_parser("solve", help="run one solver on a source/target pair")
    solve_p.add_argument("--method", choices=("brenier", "sinkhorn", "lp", "brute"), required=True)
    solve_p.add_argument("--source", required=True)
    solve_p.add_argument("--target", required=True)
    solve_p.add_argument("--output", default=None, help="result JSON path")
    _add_solver_options(solve_p)
    solve_p.set_defaults(func=_cmd_solve)

    bench = sub.add_parser("bench", help="run every solver on the same pair")
    bench.add_argument("--source", required=True)
    bench.add_argument("--target", required=True)
    bench.add_argument("--output", default=None, help="also write the table to this CSV")
    _add_solver_options(bench)
    bench.set_defaults(func=_cmd_bench)

    cl = sub.add_parser("cluster", help="transport k-means on a point cloud")
    cl.add_argument("--input", required=True)
    cl.add_argument("--clusters", "-k", type=int, default=5)
    cl.add_argument("--outer-steps", type=int, default=10)
    cl.add_argument("--center-update", choices=(GRADIENT, BARYCENTER), default=GRADIENT)
    cl.add_argument("--center-step-size", type=float, default=None)
    cl.add_argument("--seed", type=int, default=None)
    cl.add_argument("--output", required=True, help="output directory")
    _add_solver_options(cl)
    cl.set_defaults(func=_cmd_cluster)

    return parser


def _add_solver_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--step-size", type=float, default=None, help="height update step (auto if omitted)")
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=None, help="residual tolerance (auto if omitted)")
    p.add_argument("--schedule", choices=("fixed", "diminishing"), default="fixed")
    p.add_argument("--reg", type=float, default=1.0, help="entropic regularization strength")
    p.add_argument("--max-iters", type=int, default=10_000, help="entropic iteration cap")
    p.add_argument("--marginal-tolerance", type=float, default=1e-8)
    p.add_argument("--stabilized", action="store_true", help="entropic updates in log space")
    p.add_argument("--granularity", type=int, default=1, help="mass grid for --method brute")


def _cmd_gen(args) -> int:
    if args.kind == "mixture":
        measure, _, _ = make_gaussian_mixture(
            args.n,
            args.components,
            dim=args.dim,
            sigma=args.sigma,
            separation=args.separation,
            seed=args.seed,
        )
    else:
        measure = make_uniform(args.n, dim=args.dim, low=args.low, high=args.high, seed=args.seed)
    save_measure(measure, args.output)
    print(f"wrote {measure.n} points ({measure.dim}d) to {args.output}")
    return OK


def _run_method(method: str, source, target, args):
    """One solver run: (plan, converged, iterations, residual, config, extra)."""
    if method == "brenier":
        config = BrenierConfig(
            step_size=args.step_size,
            max_steps=args.max_steps,
            tolerance=args.tolerance,
            step_schedule=args.schedule,
        )
        report = solve(source, target, config)
        return report.plan, report.converged, report.iterations, report.residual, {
            "step_size": args.step_size,
            "max_steps": args.max_steps,
            "tolerance": args.tolerance,
            "step_schedule": args.schedule,
        }, {}
    if method == "sinkhorn":
        config = SinkhornConfig(
            regularization=args.reg,
            max_iters=args.max_iters,
            marginal_tolerance=args.marginal_tolerance,
            stabilized=args.stabilized,
        )
        C = cost_matrix(source, target)
        report = sinkhorn_solve(C, source.masses, target.masses, config)
        return (
            report.plan,
            report.converged,
            report.iterations,
            max(report.row_residual, report.col_residual),
            {
                "regularization": args.reg,
                "max_iters": args.max_iters,
                "marginal_tolerance": args.marginal_tolerance,
                "stabilized": args.stabilized,
            },
            {"failed_zero_denominator": report.failed_zero_denominator},
        )
    if method in ("lp", "brute"):
        C = cost_matrix(source, target)
        if method == "lp":
            report = lp_solve(C, source.masses, target.masses)
            config = {}
        else:
            report = brute_force_solve(C, source.masses, target.masses, args.granularity)
            config = {"granularity": args.granularity}
        row_res, col_res = marginal_residuals(report.plan, source.masses, target.masses)
        return report.plan, True, report.iterations, max(row_res, col_res), config, {}
    raise ValueError(f"unknown method {method!r}")


def _cmd_solve(args) -> int:
    source = load_measure(args.source)
    target = load_measure(args.target)
    start = time.perf_counter()
    try:
        plan, converged, iterations, residual, config, extra = _run_method(
            args.method, source, target, args
        )
    except NumericalError as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return NOT_CONVERGED
    except RuntimeError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return NOT_CONVERGED
    elapsed = time.perf_counter() - start

    payload = result_payload(
        args.method, plan, source, target, converged, iterations, residual, elapsed, config, extra
    )
    if args.output:
        write_result(payload, args.output)
    print(
        f"{args.method}: cost={payload['cost']:.6f} converged={converged} "
        f"iterations={iterations} residual={residual:.3e} ({elapsed:.3f}s)"
    )
    return OK if converged else NOT_CONVERGED


def _cmd_bench(args) -> int:
    source = load_measure(args.source)
    target = load_measure(args.target)
    lines = ["method,cost,seconds,converged"]
    plans = []
    for method in ("brenier", "sinkhorn", "lp"):
        start = time.perf_counter()
        try:
            plan, converged, _, _, _, _ = _run_method(method, source, target, args)
        except (NumericalError, RuntimeError) as exc:
            print(f"{method} failed: {exc}", file=sys.stderr)
            lines.append(f"{method},nan,nan,False")
            continue
        elapsed = time.perf_counter() - start
        C = cost_matrix(source, target)
        cost = float(np.sum(plan.entries * C.entries))
        lines.append(f"{method},{cost!r},{elapsed!r},{converged}")
        plans.append((method, plan))

    table = "\n".join(lines) + "\n"
    print(table, end="")
    if source.n * target.n <= PLAN_PRINT_CELLS:
        for method, plan in plans:
            print(f"plan[{method}]:")
            for row in plan.entries:
                print("  " + " ".join(f"{v:.6g}" for v in row))
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(table)
    return OK


def _cmd_cluster(args) -> int:
    source = load_measure(args.input)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    config = ClusterConfig(
        n_clusters=args.clusters,
        outer_steps=args.outer_steps,
        center_update=args.center_update,
        center_step_size=args.center_step_size,
        inner=BrenierConfig(
            step_size=args.step_size,
            max_steps=args.max_steps,
            tolerance=args.tolerance,
            step_schedule=args.schedule,
        ),
        seed=args.seed,
    )
    report = cluster(source, config)

    with open(out_dir / "assignments.csv", "w") as fh:
        fh.write("index,cluster\n")
        for i, label in enumerate(report.assignments):
            fh.write(f"{i},{int(label)}\n")
    with open(out_dir / "cost_trace.csv", "w") as fh:
        fh.write("step,cost\n")
        for record in report.steps:
            fh.write(f"{record.step},{record.cost!r}\n")
    k = report.centers.shape[0]
    save_measure_json(
        DiscreteMeasure(report.centers, np.full(k, source.total_mass / k)),
        out_dir / "centers.json",
    )
    if source.dim == 2:
        for record in report.steps:
            save_scatter_svg(
                out_dir / f"step_{record.step:02d}.svg",
                source.points,
                record.assignments,
                record.centers,
            )
        save_scatter_svg(
            out_dir / "final.svg", source.points, report.assignments, report.centers
        )

    final_cost = report.cost_trace[-1]
    print(f"clustered {source.n} points into {k} groups, final cost {final_cost:.6f}")
    print(f"outputs in {out_dir}")
    return OK


if __name__ == "__main__":
    sys.exit(main())

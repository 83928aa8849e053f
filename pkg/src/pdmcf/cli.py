"""Command-line front end: ``pdmcf generate | solve | warmstart | bench``.

Exit codes: 0 success, 2 usage error, 3 no convergence, 4 I/O or format error.
"""

from __future__ import annotations

import argparse
import logging
import csv
import sys
from pathlib import Path

from . import io
from .generator import generate_instance
from .graph import max_degree, step_size_eta
from .solver import SolverConfig, SolverDivergence, solve, warm_start_from_perturbed

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4

SUMMARY_COLUMNS = ("n", "q", "m", "nm", "iterations", "seconds")
BENCH_COLUMNS = ("n", "q", "seed", "m", "nm", "iterations", "seconds",
                 "residual", "threshold", "status")
WARM_COLUMNS = ("nu", "seed", "omega_feas", "feas_iterations", "cold_iterations",
                "warm_iterations", "cold_seconds", "warm_seconds", "cold_converged",
                "warm_converged")

log = logging.getLogger("pdmcf")


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _size_pair(text):
    try:
        n, q = (int(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N:Q, got {text!r}") from None
    return n, q


def _add_solver_options(p):
    g = p.add_argument_group("solver options")
    g.add_argument("--epsilon", type=float, default=None,
                   help="stopping threshold per entry (default 0.01/(n(n-1)))")
    g.add_argument("--rho", type=float, default=1.9, help="over-relaxation in (0, 2)")
    g.add_argument("--theta", type=float, default=0.5, help="primal-weight exponent")
    g.add_argument("--k-adapt", type=_positive_int, default=100)
    g.add_argument("--tau", type=float, default=1e-5, help="adaptation guard")
    g.add_argument("--k-check", type=_positive_int, default=25, help="residual cadence")
    g.add_argument("--max-iters", type=_positive_int, default=1_000_000)
    g.add_argument("--omega0", type=float, default=1.0)
    g.add_argument("--freeze-after", type=int, default=None,
                   help="stop adapting the primal weight after this iteration")


def _config(args) -> SolverConfig:
    try:
        return SolverConfig(epsilon=args.epsilon, rho=args.rho, theta=args.theta,
                            k_adapt=args.k_adapt, tau=args.tau, k_check=args.k_check,
                            max_iters=args.max_iters, omega0=args.omega0,
                            freeze_after=args.freeze_after)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _print_rows(columns, rows):
    io.write_csv_rows(sys.stdout, columns, rows)
    sys.stdout.flush()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdmcf", description="All-pairs multicommodity network flow via PDHG.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random geometric instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family", choices=("log", "power"), default="log")
    p.add_argument("--gamma", type=float, default=None, help="power-utility exponent")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve an instance file")
    p.add_argument("instance")
    p.add_argument("--out", default=None, help="solution file (JSON)")
    p.add_argument("--trace", default=None, help="trace file (CSV)")
    p.add_argument("--warm-start", default=None, help="warm-start file from 'warmstart'")
    p.add_argument("--figures", default=None, help="directory for the convergence plot")
    _add_solver_options(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("warmstart", help="run the perturbed warm-start protocol")
    p.add_argument("instance")
    p.add_argument("--nu", type=float, nargs="+", required=True)
    p.add_argument("--seed", type=int, default=0, help="perturbation seed")
    p.add_argument("--out", default=None,
                   help="warm-start file; with several --nu values, _nu<value> is inserted")
    p.add_argument("--figures", default=None, help="directory for the warm-start plot")
    _add_solver_options(p)
    p.set_defaults(func=cmd_warmstart)

    p = sub.add_parser("bench", help="seed sweep over instance sizes")
    p.add_argument("--sizes", type=_size_pair, nargs="+", required=True, metavar="N:Q")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--out", default=None, help="CSV file (also printed to stdout)")
    p.add_argument("--figures", default=None, help="directory for the runtime plot")
    _add_solver_options(p)
    p.set_defaults(func=cmd_bench)
    return parser


def cmd_generate(args) -> int:
    if args.n < 2:
        raise UsageError(f"--n must be at least 2, got {args.n}")
    if not 1 <= args.q < args.n:
        raise UsageError(f"--q must satisfy 1 <= q < n, got {args.q}")
    if args.family == "power" and (args.gamma is None or not 0 < args.gamma < 1):
        raise UsageError("--family power needs --gamma in (0, 1)")
    gamma = args.gamma if args.family == "power" else None
    inst = generate_instance(args.n, args.q, args.seed, args.family, gamma)
    meta = {"generator": "knn-geometric", "q": args.q, "seed": args.seed}
    io.write_instance(args.out, inst, meta)
    topo = inst.topology
    _print_rows(("n", "m", "d_max", "eta"),
                [{"n": inst.n, "m": inst.m, "d_max": max_degree(topo),
                  "eta": step_size_eta(topo)}])
    return EXIT_OK


def _solve_summary(inst, q, sol):
    return {"n": inst.n, "q": "" if q is None else q, "m": inst.m, "nm": inst.n * inst.m,
            "iterations": sol.iterations, "seconds": round(sol.seconds, 4)}


def cmd_solve(args) -> int:
    config = _config(args)
    inst = io.read_instance(args.instance)
    q = io.read_instance_meta(args.instance).get("q")
    warm = io.read_warmstart(args.warm_start) if args.warm_start else None
    sol = solve(inst, config, warm)
    if args.out:
        io.write_solution(args.out, sol)
    if args.trace:
        io.write_trace(args.trace, sol.trace)
    if args.figures:
        from .plotting import plot_convergence
        stem = Path(args.instance).stem
        plot_convergence(sol.trace, inst.n * inst.m, Path(args.figures) / f"{stem}_convergence.png",
                         title=f"n={inst.n}, m={inst.m}")
    _print_rows(SUMMARY_COLUMNS, [_solve_summary(inst, q, sol)])
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def _warm_path(out, nu, several):
    if not several:
        return Path(out)
    p = Path(out)
    return p.with_name(f"{p.stem}_nu{nu:g}{p.suffix}")


def cmd_warmstart(args) -> int:
    for nu in args.nu:
        if not 0 <= nu < 1:
            raise UsageError(f"--nu must lie in [0, 1), got {nu}")
    config = _config(args)
    inst = io.read_instance(args.instance)
    cold = solve(inst, config)
    rows, ok = [], cold.converged
    for nu in args.nu:
        ws = warm_start_from_perturbed(inst, nu, config, seed=args.seed)
        if args.out:
            io.write_warmstart(_warm_path(args.out, nu, len(args.nu) > 1), ws,
                               {"nu": nu, "seed": args.seed})
        warm = solve(inst, config, ws)
        ok = ok and warm.converged
        rows.append({"nu": nu, "seed": args.seed, "omega_feas": ws.omega,
                     "feas_iterations": ws.iterations,
                     "cold_iterations": cold.iterations, "warm_iterations": warm.iterations,
                     "cold_seconds": round(cold.seconds, 4),
                     "warm_seconds": round(warm.seconds, 4),
                     "cold_converged": cold.converged, "warm_converged": warm.converged})
    if args.figures:
        from .plotting import plot_warmstart
        plot_warmstart(rows, Path(args.figures) / f"{Path(args.instance).stem}_warmstart.png")
    _print_rows(WARM_COLUMNS, rows)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def run_bench(sizes, seeds, config, out=None):
    """Solve one generated instance per (size, seed); failures become rows too.

    Rows are streamed to ``out`` (stdout by default) as they finish.
    """
    out = sys.stdout if out is None else out
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    rows = []
    for n, q in sizes:
        for seed in seeds:
            row = {"n": n, "q": q, "seed": seed}
            try:
                inst = generate_instance(n, q, seed)
                sol = solve(inst, config)
                nm = inst.n * inst.m
                row.update(m=inst.m, nm=nm, iterations=sol.iterations,
                           seconds=round(sol.seconds, 4), residual=sol.final_residual,
                           threshold=nm * sol.epsilon,
                           status="converged" if sol.converged else "not_converged")
            except (ValueError, RuntimeError, SolverDivergence) as exc:
                log.error("n=%d q=%d seed=%d failed: %s", n, q, seed, exc)
                row["status"] = f"error: {exc}"
            rows.append(row)
            writer.writerow([io.format_cell(row.get(c, "")) for c in BENCH_COLUMNS])
            out.flush()
    return rows


def cmd_bench(args) -> int:
    config = _config(args)
    rows = run_bench(args.sizes, args.seeds, config)
    if args.out:
        io.write_csv_rows(args.out, BENCH_COLUMNS, rows)
    if args.figures:
        from .plotting import plot_runtime
        plot_runtime(rows, Path(args.figures) / "runtime.png")
    return EXIT_OK if all(r.get("status") == "converged" for r in rows) else EXIT_NOT_CONVERGED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except (OSError, io.FormatError) as exc:
        print(f"pdmcf: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # content that parses but violates an instance invariant
        print(f"pdmcf: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverDivergence as exc:
        print(f"pdmcf: error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())

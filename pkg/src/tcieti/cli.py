"""Command-line entry point.

Exit codes: 0 success, 2 invariant or configuration violation, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .coupling import ConsistencyError
from .experiments import (ExperimentConfig, run_appendix_ratios, run_convergence, run_scalability,
                          run_torus_study)
from .fem import trig_case
from .linalg import FactorizationError
from .mesh import ConfigurationError, GeometryError, decomposition_from_config, write_graph_csv
from .solver import SolverFailure, setup_problem, solve
from .tree import InvariantViolation

EXIT_OK, EXIT_INVARIANT, EXIT_SOLVER = 0, 2, 3


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def _common(p):
    p.add_argument("--precond", choices=("none", "lumped", "dirichlet"), default="dirichlet")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--belt", action=argparse.BooleanOptionalAction, default=True,
                   help="close loops around holes with an extra tree edge")
    p.add_argument("--out", default=None, help="CSV path; a JSON sidecar is written next to it")
    p.add_argument("--threads", type=int, default=1)


def build_parser():
    ap = argparse.ArgumentParser(prog="tcieti", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convergence", help="eps_B over mesh refinement on the cube")
    _common(p)
    p.add_argument("--sh", type=_ints, default=(2, 4, 8, 16))
    p.add_argument("--sH", type=_ints, default=(2,))

    p = sub.add_parser("torus", help="condition numbers for the torus boundary setups")
    _common(p)
    p.add_argument("--sh", type=int, default=4)
    p.add_argument("--N", type=_ints, default=(3, 6))

    p = sub.add_parser("scalability", help="scalability tests on the cube")
    _common(p)
    p.add_argument("--test", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--sh", type=_ints, default=None)
    p.add_argument("--sH", type=_ints, default=None)

    p = sub.add_parser("ratios", help="coarse-to-full size ratios")
    _common(p)
    p.add_argument("--sh", type=_ints, default=(1, 2, 4))
    p.add_argument("--sH", type=_ints, default=(2, 4))

    p = sub.add_parser("solve", help="single solve from a JSON configuration")
    _common(p)
    p.add_argument("--config", required=True)
    p.add_argument("--dump-graph", default=None, help="write the classified edge table as CSV")
    p.add_argument("--maxiter", type=int, default=None, help="PCG iteration cap (default 10 m_r)")
    return ap


def _print_table(res, stream):
    w = [max(len(c), 12) for c in res.columns]
    stream.write("  ".join(c.rjust(n) for c, n in zip(res.columns, w)) + "\n")
    for row in res.rows:
        cells = []
        for v, n in zip(row, w):
            if v is None:
                s = "---"
            elif isinstance(v, float):
                s = f"{v:.4g}"
            else:
                s = str(v)
            cells.append(s.rjust(n))
        stream.write("  ".join(cells) + "\n")


def _run(args):
    if args.command == "solve":
        cfg = json.loads(Path(args.config).read_text())
        dec, graph, bc = decomposition_from_config(cfg)
        problem = setup_problem(dec, graph, bc, trig_case(), belt=cfg.get("belt", args.belt))
        if not problem.hierarchy.ok:
            raise InvariantViolation(f"tree hierarchy check failed: {problem.hierarchy.as_dict()}")
        report, _, _ = solve(problem, cfg.get("precond", args.precond), float(cfg.get("tol", args.tol)),
                             threads=args.threads, estimate=("S", "F"), maxiter=args.maxiter)
        if args.dump_graph:
            write_graph_csv(graph, args.dump_graph, problem.gauge)
        text = report.to_json(indent=1)
        if args.out:
            Path(args.out).write_text(text)
        print(f"iterations={report.iterations} eps_B={report.eps_B:.6e} n_gp={report.n_gp} m_r={report.m_r}")
        return EXIT_OK

    if args.command == "convergence":
        cfg = ExperimentConfig(s_h=args.sh, s_H=args.sH, precond=args.precond, tol=args.tol,
                               belt=args.belt, threads=args.threads, out=args.out)
        res = run_convergence(cfg)
    elif args.command == "torus":
        cfg = ExperimentConfig(geometry="torus", layout="torus-mixed", s_h=(args.sh,), n_ring=args.N,
                               precond=args.precond, tol=args.tol, threads=args.threads, out=args.out)
        res = run_torus_study(cfg)
    elif args.command == "scalability":
        defaults = {1: ((2, 4, 8, 16), (2,)), 2: ((8,), (2,)), 3: ((2,), (2, 3, 4))}[args.test]
        cfg = ExperimentConfig(s_h=args.sh or defaults[0], s_H=args.sH or defaults[1], precond=args.precond,
                               tol=args.tol, belt=args.belt, threads=args.threads, out=args.out)
        res = run_scalability(cfg, args.test)
    else:
        cfg = ExperimentConfig(s_h=args.sh, s_H=args.sH, belt=args.belt, out=args.out)
        res = run_appendix_ratios(cfg)

    _print_table(res, sys.stdout)
    for k, v in res.extra.items():
        if not isinstance(v, dict):
            print(f"{k}: {v}")
    if args.out:
        res.write(args.out, cfg)
    if not res.ok:
        bad = [k for k, v in res.checks.items() if not v]
        print(f"consistency checks failed: {', '.join(bad)}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (InvariantViolation, ConsistencyError, ConfigurationError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (SolverFailure, FactorizationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

"""Command line: solve, validate, generate, oracle-check."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .driver import DriverConfig, solve
from .fileio import InstanceFormatError, format_summary, parse_instance, write_instance, write_report
from .generator import GeneratorError, GeneratorParams, generate_instance

log = logging.getLogger("tailassign")


def _driver_config(args) -> DriverConfig:
    return DriverConfig(
        epsilon=args.epsilon,
        strict_disjoint=args.strict_disjoint,
        cp_iterations=args.cp_iterations,
        parallel_workers=args.workers,
        serial_mode=args.serial,
        max_cg_iterations=args.max_iterations,
        time_limit=args.time_limit,
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True, help="instance JSON file")
    p.add_argument("--epsilon", type=float, default=0.9, help="dual penalty factor in [0.8, 1.0]")
    p.add_argument("--strict-disjoint", action="store_true", help="strict path selection test")
    p.add_argument("--cp-iterations", type=int, default=10,
                   help="iterations priced on propagated connections (0 disables propagation)")
    p.add_argument("--workers", type=int, default=1, help="pricing worker processes")
    p.add_argument("--serial", action="store_true", help="price tails one after another")
    p.add_argument("--max-iterations", type=int, default=DriverConfig.max_cg_iterations, help="column generation iteration cap")
    p.add_argument("--time-limit", type=float, default=None, help="column generation time limit (s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailassign", description="Tail assignment by column generation")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an instance and write a report")
    _add_solver_flags(p)
    p.add_argument("--out", help="report JSON path (a .txt summary is written next to it)")

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("--instance", required=True)

    p = sub.add_parser("generate", help="write a synthetic instance")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tails", type=int, default=14)
    p.add_argument("--flights", type=int, default=243)
    p.add_argument("--days", type=int, default=5)
    p.add_argument("--bases", type=int, default=5)
    p.add_argument("--preassignment-rate", type=float, default=0.2)
    p.add_argument("--no-guarantee", action="store_true", help="perturb times after planting routes")

    p = sub.add_parser("oracle-check", help="compare the solver with brute force on a small instance")
    _add_solver_flags(p)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (InstanceFormatError, GeneratorError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _solve(args) -> int:
    instance = parse_instance(args.instance)
    solution, report = solve(instance, _driver_config(args))
    for w in report.warnings:
        log.warning(w)
    sys.stdout.write(format_summary(solution, report))
    if args.out:
        write_report(solution, report, args.out)
    if report.violations:
        for v in report.violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1
    return 0


def _validate(args) -> int:
    instance = parse_instance(args.instance)
    s = instance.summary()
    print(f"ok: {s['tails']} tails, {s['flights']} flights, {s['horizon_days']} days")
    return 0


def _generate(args) -> int:
    params = GeneratorParams(
        tails=args.tails, flights=args.flights, horizon_days=args.days, bases=args.bases,
        preassignment_rate=args.preassignment_rate, seed=args.seed,
        guarantee_feasible=not args.no_guarantee,
    )
    instance = generate_instance(params)
    write_instance(instance, args.out)
    s = instance.summary()
    print(f"wrote {args.out}: {s['tails']} tails, {s['flights']} flights, {s['horizon_days']} days")
    return 0


def _oracle_check(args) -> int:
    from .oracle import OracleSizeError, all_routes, solve_exact, solve_lp_full

    instance = parse_instance(args.instance)
    try:
        routes = all_routes(instance)
        lp_ref = solve_lp_full(instance, routes)
        exact = solve_exact(instance, routes=routes)
    except OracleSizeError as exc:
        print(f"error: instance too large for the oracle: {exc}", file=sys.stderr)
        return 1
    solution, report = solve(instance, _driver_config(args))
    lp_gap = abs(report.lp_objective - lp_ref) / max(1.0, abs(lp_ref))
    print(f"{'':10} {'solver':>14} {'oracle':>14}")
    print(f"{'LP':10} {report.lp_objective:>14.4f} {lp_ref:>14.4f}")
    print(f"{'IP':10} {solution.objective:>14.4f} {exact.objective:>14.4f}")
    ok = lp_gap <= 1e-5 and not report.violations
    print("LP match" if lp_gap <= 1e-5 else f"LP differs (relative {lp_gap:.2e})")
    if solution.objective > exact.objective + 1e-6:
        print(f"IP gap {solution.objective - exact.objective:.4f} above the exact optimum")
    return 0 if ok else 1


_COMMANDS = {"solve": _solve, "validate": _validate, "generate": _generate, "oracle-check": _oracle_check}

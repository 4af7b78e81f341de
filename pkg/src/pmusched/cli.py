"""Command line entry point: ``pmusched solve|derive|bench|verify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .bnb import greedy_baseline, solve
from .core import SchedulingError, dump_instance, load_instance
from .lagrangian import compute_bound

EXIT_BAD_INPUT = 2


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_BAD_INPUT


def _print_trace(trace: list):
    for ev in trace:
        line = f"{ev['event']:>9} lb={ev['lb']} r={ev['r']}"
        if "edges" in ev:
            edges = " ".join(f"{a + 1}->{b + 1}" for a, b in ev["edges"])
            line += f" beta={ev['beta']} edges=[{edges}]"
        print(line, file=sys.stderr)


def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (OSError, SchedulingError) as exc:
        return _fail(str(exc))
    trace = [] if args.trace else None
    if args.solver == "greedy":
        s = greedy_baseline(inst)
        bound = compute_bound(inst, s, trace=trace)
        report = {"order": [j + 1 for j in s.order], "objective": s.objective, "lb": bound.lb,
                  "nodes": 0, "proven_optimal": bound.lb == s.objective}
    else:
        res = solve(inst, node_cap=args.node_cap, time_cap_ms=args.time_cap_ms, seed=args.seed,
                    trace=trace)
        report = {"order": [j + 1 for j in res.best_schedule.order], "objective": res.best_objective,
                  "lb": res.global_lb, "nodes": res.nodes_explored,
                  "proven_optimal": res.proven_optimal}
        if res.limit_hit:
            report["limit_hit"] = res.limit_hit
    if trace is not None:
        _print_trace(trace)
    print(json.dumps(report))
    return 0


def cmd_derive(args) -> int:
    from .grid import CaseError, Placement, derive, is_cover, load_case

    try:
        net = load_case(args.case)
    except FileNotFoundError:
        return _fail(f"no such case: {args.case}")
    except CaseError as exc:
        return _fail(str(exc))
    placement = None
    if args.pmu_buses:
        buses = tuple(sorted(int(b) for b in args.pmu_buses.split(",")))
        if not is_cover(net, buses):
            return _fail(f"buses {buses} do not observe the whole network")
        placement = Placement(buses, optimal=False)
    try:
        d = derive(net, args.seed, placement, time_cap_s=args.placement_time_cap_s)
    except (CaseError, SchedulingError, ArithmeticError) as exc:
        return _fail(str(exc))
    text = dump_instance(d.instance)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    report = {"case": net.name or Path(args.case).stem, "n": d.placement.n,
              "buses": list(d.placement.pmu_buses), "optimal": d.placement.optimal,
              "precedence": d.ranked}
    print(json.dumps(report), file=sys.stdout if args.out else sys.stderr)
    return 0


def cmd_bench(args) -> int:
    try:
        jobs = bench.load_suite(args.suite)
    except bench.SuiteError as exc:
        return _fail(str(exc))
    records = bench.run_suite(jobs, workers=args.jobs)
    bench.write_csv(args.out, records + bench.aggregate(records))
    plot = args.plot_out or str(Path(args.out).with_suffix(".plot.csv"))
    bench.write_plot_data(plot, records)
    print(f"{len(records)} records -> {args.out}; plot data -> {plot}")
    return 0


def cmd_verify(args) -> int:
    if not 2 <= args.n_max <= 9:
        return _fail("--n-max must lie in 2..9")
    report = bench.verify(args.n_max, args.trials, args.seed, fault=args.inject_fault)
    if report.failure is None:
        print(f"verify: {report.passed}/{report.trials} passed")
        return 0
    Path(args.reproducer).write_text(json.dumps(report.failure, indent=2) + "\n")
    print(f"verify: FAILED at trial {report.failure['trial']} "
          f"({'; '.join(report.failure['problems'])}); reproducer in {args.reproducer}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmusched", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="schedule one instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--solver", choices=["bnb", "greedy"], default="bnb")
    p.add_argument("--node-cap", type=int)
    p.add_argument("--time-cap-ms", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", action="store_true", help="dump root bound iterations to stderr")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("derive", help="build an instance from a power network case")
    p.add_argument("--case", required=True, help="case file, or a bundled name such as case14")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--pmu-buses", help="comma-separated buses to use instead of optimal placement")
    p.add_argument("--placement-time-cap-s", type=float)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("bench", help="run a benchmark suite to CSV")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot-out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="compare the solver with brute force")
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reproducer", default="verify_failure.json")
    p.add_argument("--inject-fault", type=int, default=0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

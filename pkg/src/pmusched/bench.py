"""Benchmark suites, CSV records, and the brute-force verification sweep."""

from __future__ import annotations

import csv
import json
import logging
import random
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from .bnb import greedy_baseline, node_violations, solve
from .core import brute_force_optimal, instance_to_dict, random_instance
from .lagrangian import compute_bound

log = logging.getLogger(__name__)

COLUMNS = ["suite_id", "source", "n", "density", "seed", "solver", "objective", "lb", "nodes",
           "time_ms", "optimal"]


class SuiteError(ValueError):
    pass


@dataclass(frozen=True)
class BenchRecord:
    suite_id: str
    source: str
    n: int
    density: float | None
    seed: int | None
    solver: str
    objective: float
    lb: float
    nodes: float
    time_ms: float
    optimal: float | bool


@dataclass(frozen=True)
class Job:
    suite_id: str
    source: str
    seed: int
    n: int = 0
    density: float | None = None
    weight_max: int = 10
    node_cap: int | None = None
    time_cap_ms: float | None = None
    placement_time_cap_s: float | None = None


def load_suite(path: str | Path) -> list[Job]:
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SuiteError(f"cannot read suite {path}: {exc}") from exc
    return expand_suite(spec)


def expand_suite(spec: dict) -> list[Job]:
    if not isinstance(spec, dict):
        raise SuiteError("suite must be an object")
    suite_id = str(spec.get("suite_id", "suite"))
    caps = dict(node_cap=spec.get("node_cap"), time_cap_ms=spec.get("time_cap_ms"))
    jobs = []
    for case in spec.get("cases", []):
        for seed in spec.get("case_seeds", [0]):
            jobs.append(Job(suite_id, str(case), int(seed),
                            placement_time_cap_s=spec.get("placement_time_cap_s"), **caps))
    gen = spec.get("generator")
    if gen:
        try:
            ns = [int(x) for x in gen["n"]]
            densities = [float(x) for x in gen.get("density", [0.0])]
            reps = int(gen.get("repetitions", 1))
            seed = int(gen.get("seed", 0))
            weight_max = int(gen.get("weight_max", 10))
        except (KeyError, TypeError, ValueError) as exc:
            raise SuiteError(f"bad generator block: {exc}") from exc
        for n in ns:
            for d in densities:
                for _ in range(reps):
                    jobs.append(Job(suite_id, "random", seed, n, d, weight_max, **caps))
                    seed += 1
    if not jobs:
        raise SuiteError("suite defines no instances")
    return jobs


def _instance(job: Job):
    if job.source == "random":
        return random_instance(job.seed, job.n, job.density, job.weight_max)
    from .grid import derive_instance, load_case

    return derive_instance(load_case(job.source), job.seed, time_cap_s=job.placement_time_cap_s)


def run_job(job: Job) -> list[BenchRecord]:
    try:
        inst = _instance(job)
        t = time.perf_counter()
        res = solve(inst, node_cap=job.node_cap, time_cap_ms=job.time_cap_ms, seed=job.seed)
        bnb_ms = (time.perf_counter() - t) * 1000
        t = time.perf_counter()
        g = greedy_baseline(inst)
        greedy_ms = (time.perf_counter() - t) * 1000
    except Exception:
        log.exception("instance %s seed %s failed", job.source, job.seed)
        return []
    common = dict(suite_id=job.suite_id, source=job.source, n=inst.n_jobs, density=job.density,
                  seed=job.seed)
    return [
        BenchRecord(solver="bnb", objective=res.best_objective, lb=res.global_lb,
                    nodes=res.nodes_explored, time_ms=round(bnb_ms, 3), optimal=res.proven_optimal,
                    **common),
        BenchRecord(solver="greedy", objective=g.objective, lb=res.global_lb, nodes=0,
                    time_ms=round(greedy_ms, 3), optimal=g.objective == res.global_lb, **common),
    ]


def run_suite(jobs: list[Job], workers: int = 1) -> list[BenchRecord]:
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            batches = list(pool.map(run_job, jobs))
    else:
        batches = [run_job(j) for j in jobs]
    return [r for batch in batches for r in batch]


def aggregate(records: list[BenchRecord]) -> list[BenchRecord]:
    groups = defaultdict(list)
    for r in records:
        groups[(r.suite_id, r.source, r.n, r.density, r.solver)].append(r)
    out = []
    for (suite_id, source, n, density, solver), rs in groups.items():
        k = len(rs)
        frac = sum(bool(r.optimal) for r in rs) / k
        for stat, f in (("mean", lambda xs: sum(xs) / len(xs)), ("max", max)):
            out.append(BenchRecord(
                suite_id, f"{stat}:{solver}:{source}", n, density, None, "aggregate",
                f([r.objective for r in rs]), f([r.lb for r in rs]), f([r.nodes for r in rs]),
                f([r.time_ms for r in rs]), frac))
    return out


def plot_rows(records: list[BenchRecord]) -> list[dict]:
    groups = defaultdict(list)
    for r in records:
        if r.solver != "aggregate":
            groups[(r.solver, r.n)].append(r)
    return [
        {"solver": solver, "n": n,
         "mean_time_ms": sum(r.time_ms for r in rs) / len(rs),
         "mean_nodes": sum(r.nodes for r in rs) / len(rs)}
        for (solver, n), rs in sorted(groups.items())
    ]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def write_csv(path: str | Path, records: list[BenchRecord]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([_cell(getattr(r, c)) for c in COLUMNS])


def _num(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        return float(s)


def read_csv(path: str | Path) -> list[BenchRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        vals = {f.name: row[f.name] if f.name in ("suite_id", "source", "solver") else _num(row[f.name])
                for f in fields(BenchRecord)}
        out.append(BenchRecord(**vals))
    return out


def write_plot_data(path: str | Path, records: list[BenchRecord]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, ["solver", "n", "mean_time_ms", "mean_nodes"], lineterminator="\n")
        w.writeheader()
        w.writerows(plot_rows(records))


@dataclass
class VerifyReport:
    trials: int
    passed: int
    failure: dict | None = None


def verify(n_max: int = 8, trials: int = 200, seed: int = 0, fault: int = 0) -> VerifyReport:
    """Solve random instances and compare against brute force, checking every node."""
    if not 2 <= n_max <= 9:
        raise ValueError("n_max must lie in 2..9")
    rng = random.Random(seed)
    passed = 0
    for t in range(trials):
        n = rng.randint(2, n_max)
        density = rng.choice([0.0, 0.2, 0.5])
        inst_seed = rng.randrange(2**31)
        inst = random_instance(inst_seed, n, density, 10)
        problems = []

        def observe(node, sub, bound):
            problems.extend(node_violations(sub, bound))

        res = solve(inst, seed=inst_seed, observer=observe)
        got = res.best_objective + fault
        opt = brute_force_optimal(inst).objective
        root = compute_bound(inst, res.best_schedule)
        if got != opt:
            problems.append(f"solver objective {got} != brute force {opt}")
        if not root.lb <= opt <= root.ub:
            problems.append(f"sandwich broken: {root.lb} <= {opt} <= {root.ub}")
        if problems:
            return VerifyReport(trials, passed, {
                "trial": t, "seed": inst_seed, "n": n, "density": density,
                "instance": instance_to_dict(inst), "expected": opt, "got": got,
                "problems": problems})
        passed += 1
    return VerifyReport(trials, passed)


"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import random
import time
import warnings

import pytest

from pmusched.bench import verify
from pmusched.bnb import greedy_baseline, node_violations, solve
from pmusched.core import count_linear_extensions, make_instance, random_instance, wspt_order
from pmusched.grid import derive, is_cover, load_case, place_pmus
from pmusched.lagrangian import build_cost_matrix, compute_bound, init_multipliers

TARGET_CHAIN_IEEE14 = [9, 6, 7, 2]


@pytest.fixture
def report(capsys, request):
    """Call with (ok, detail); prints the verdict even when output is captured."""
    label = request.node.name.replace("test_", "")

    def emit(ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\nACCEPTANCE {label}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
        assert ok, detail

    return emit


class NodeAudit:
    """Observer collecting invariant breaches from every search node."""

    def __init__(self):
        self.nodes = 0
        self.problems = []

    def __call__(self, node, sub, bound):
        self.nodes += 1
        self.problems.extend(node_violations(sub, bound))


def c1_instances(seed=0):
    # same stream the verify harness draws for (n_max=8, seed)
    rng = random.Random(seed)
    for _ in range(200):
        n = rng.randint(2, 8)
        density = rng.choice([0.0, 0.2, 0.5])
        yield random_instance(rng.randrange(2**31), n, density, 10)


def c3_instances():
    rng = random.Random(77)
    for _ in range(100):
        yield random_instance(rng.randrange(2**31), rng.randint(1, 30))


def test_c1_oracle_optimality(report):
    t = time.perf_counter()
    res = verify(n_max=8, trials=200, seed=0)
    secs = time.perf_counter() - t
    ok = res.failure is None and res.passed == 200 and secs < 60
    report(ok, f"{res.passed}/200 match brute force in {secs:.1f}s"
               + (f"; first failure {res.failure}" if res.failure else ""))


def test_c2_hand_trace(report, trace_inst):
    st = init_multipliers(build_cost_matrix(trace_inst))
    lb0 = st.lb
    trace = []
    bound = compute_bound(trace_inst, (1, 2, 0), trace=trace)
    cycles = [e for e in trace if e["event"] != "init"]
    sol = solve(trace_inst)
    got = dict(lb0=lb0, constraints=len(cycles), beta=int(cycles[0]["beta"]) if cycles else None,
               lb1=bound.lb, order=tuple(j + 1 for j in bound.schedule.order), ub=bound.ub,
               nodes=sol.nodes_explored, objective=sol.best_objective)
    want = dict(lb0=23, constraints=1, beta=4, lb1=27, order=(2, 3, 1), ub=27, nodes=1, objective=27)
    report(got == want, str(got))


def test_c3_no_precedence_identity(report):
    bad = []
    for inst in c3_instances():
        lb = init_multipliers(build_cost_matrix(inst)).lb
        if lb != wspt_order(inst).objective:
            bad.append((inst, lb))
    report(not bad, f"{100 - len(bad)}/100 root bounds equal the WSPT optimum")


def test_c4_bound_invariants(report, trace_inst):
    audit = NodeAudit()
    instances = [trace_inst, *c1_instances(), *c3_instances()]
    sandwich = []
    for inst in instances:
        res = solve(inst, observer=audit)
        if res.root_lb > res.best_objective:
            sandwich.append(inst)
    ok = not audit.problems and not sandwich
    report(ok, f"{audit.nodes} nodes over {len(instances)} solves, "
               f"{len(audit.problems)} violations, {len(sandwich)} root bounds above incumbent")


@pytest.mark.parametrize("name,count", [("case14", 4), ("case30", 10), ("case39", 13), ("case57", 17)])
def test_c5_placement_counts(report, name, count):
    net = load_case(name)
    t = time.perf_counter()
    p = place_pmus(net, time_cap_s=60)
    secs = time.perf_counter() - t
    ok = p.optimal and p.n == count and is_cover(net, p.pmu_buses) and secs < 60
    report(ok, f"{name}: N={p.n} (target {count}), optimal={p.optimal}, {secs:.2f}s")


@pytest.mark.slow
def test_c5_placement_ieee118_optional(report):
    net = load_case("case118")
    t = time.perf_counter()
    p = place_pmus(net, time_cap_s=600)
    secs = time.perf_counter() - t
    ok = p.optimal and p.n == 32 and is_cover(net, p.pmu_buses)
    report(ok, f"case118: N={p.n} (target 32), optimal={p.optimal}, {secs:.1f}s")


def test_c6_ieee14_pipeline(report):
    net = load_case("case14")
    d = derive(net, seed=0)
    buses = d.placement.pmu_buses
    cover_ok = buses == (2, 6, 7, 9) and is_cover(net, buses) and d.placement.optimal
    total_order = (sorted(d.ranked) == sorted(buses)
                   and count_linear_extensions(d.instance.closure) == 1
                   and len(d.instance.precedence) == len(buses) - 1)
    chain = ">".join(f"PMU{b}" for b in d.ranked)
    detail = f"placement {buses}, derived chain {chain}"
    if d.ranked != TARGET_CHAIN_IEEE14:
        target = ">".join(f"PMU{b}" for b in TARGET_CHAIN_IEEE14)
        sigma = ", ".join(f"{s:.3f}" for s in d.svd.singular_values)
        msg = f"derived chain {chain} differs from target {target} (singular values {sigma})"
        warnings.warn(msg)
        detail += f"; DISCREPANCY: {msg}"
    report(cover_ok and total_order, detail)


def test_c7_greedy_dominance(report):
    rng = random.Random(9)
    worse, compared = [], 0
    for _ in range(150):
        inst = random_instance(rng.randrange(2**31), rng.randint(2, 14), rng.choice([0.0, 0.1, 0.3, 0.6]))
        res = solve(inst)
        if res.proven_optimal:
            compared += 1
            if res.best_objective > greedy_baseline(inst).objective:
                worse.append(inst)
    chain_mismatch = 0
    for n in (1, 5, 20, 60):
        p = [rng.randint(1, 50) for _ in range(n)]
        w = [rng.randint(1, 10) for _ in range(n)]
        perm = rng.sample(range(n), n)
        inst = make_instance(p, w, list(zip(perm, perm[1:])))
        res, g = solve(inst), greedy_baseline(inst)
        if res.best_schedule.order != g.order or res.best_objective != g.objective:
            chain_mismatch += 1
    ok = compared == 150 and not worse and not chain_mismatch
    report(ok, f"{compared} proven-optimal solves, {len(worse)} worse than greedy, "
               f"{chain_mismatch} chain mismatches")


def test_c8_scale(report):
    rng = random.Random(156)
    perm = rng.sample(range(156), 156)
    chain = make_instance([rng.randint(1, 50) for _ in range(156)],
                          [rng.randint(1, 10) for _ in range(156)], list(zip(perm, perm[1:])))
    t = time.perf_counter()
    res = solve(chain)
    chain_secs = time.perf_counter() - t
    chain_ok = res.proven_optimal and res.best_schedule.order == tuple(perm) and chain_secs < 1

    inst = random_instance(32, 32, 0.3)
    audit = NodeAudit()
    big = solve(inst, node_cap=100_000, observer=audit)
    big_ok = (big.proven_optimal or big.limit_hit == "node-limit") and not audit.problems
    big_ok = big_ok and big.global_lb <= big.best_objective
    report(chain_ok and big_ok,
           f"156-job chain in {chain_secs * 1000:.0f} ms; 32-job density 0.3: "
           f"proven_optimal={big.proven_optimal}, nodes={big.nodes_explored}, "
           f"violations={len(audit.problems)}")

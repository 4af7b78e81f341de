import itertools
import random

import numpy as np
import pytest

from pmusched.bnb import initial_heuristic
from pmusched.core import (
    brute_force_optimal,
    evaluate_schedule,
    linear_extensions,
    make_instance,
    random_instance,
    wspt_order,
)
from pmusched.lagrangian import (
    INF,
    BothInfinite,
    CostMatrix,
    CycleConstraint,
    InfeasibleSchedule,
    NonPositiveBeta,
    NotTriangular,
    apply_constraint,
    build_cost_matrix,
    compute_bound,
    extract_schedule,
    find_blocking_cycle,
    find_cycle_constraints,
    init_multipliers,
    slack_constraints,
    strengthen_by_maxflow,
    upper_bound,
)


def trace_state(inst):
    return init_multipliers(build_cost_matrix(inst))


def test_cost_matrix_trace(trace_inst):
    c = build_cost_matrix(trace_inst).entries
    # 1-based: c12=2, c21=6, c13=inf, c31=9, c23=2, c32=6
    assert (c[0, 1], c[1, 0], c[0, 2], c[2, 0], c[1, 2], c[2, 1]) == (2, 6, INF, 9, 2, 6)
    assert build_cost_matrix(trace_inst).base == 10


def test_cost_matrix_no_precedence_is_finite():
    assert np.isfinite(build_cost_matrix(random_instance(1, 6)).entries).all()


@pytest.mark.parametrize("n", [2, 5, 8])
def test_cost_matrix_chain_infinities(n):
    inst = make_instance([1] * n, [1] * n, [(i, i + 1) for i in range(n - 1)])
    assert np.isinf(build_cost_matrix(inst).entries).sum() == n * (n - 1) // 2


def test_init_two_jobs():
    st = trace_state(make_instance([2, 3], [4, 5]))
    assert st.alpha2[0, 1] == st.alpha2[1, 0] == 10  # alpha = 5
    assert st.reduced()[0, 1] == 0 and st.reduced()[1, 0] == 2
    assert st.lb == 33


def test_init_trace(trace_inst):
    st = trace_state(trace_inst)
    assert st.alpha2[0, 1] / 2 == 1 and st.alpha2[0, 2] / 2 == 4.5 and st.alpha2[1, 2] / 2 == 1
    assert st.lb == 23
    R = st.reduced()
    assert R[0, 1] == 0 and R[1, 0] == 4 and R[0, 2] == INF and R[2, 0] == 0
    assert R[1, 2] == 0 and R[2, 1] == 4


def test_init_identical_jobs():
    st = trace_state(make_instance([1, 1, 1], [1, 1, 1]))
    assert not st.reduced2.any() and st.lb == 6


def test_init_rejects_both_infinite():
    c = np.array([[0, INF], [INF, 0]])
    with pytest.raises(BothInfinite):
        init_multipliers(CostMatrix(c, 0))


@pytest.mark.parametrize("seed", range(25))
def test_init_pairs_have_a_zero(seed):
    st = trace_state(random_instance(seed, 7, 0.3))
    R = st.reduced2
    assert np.all((R == 0) | (R.T == 0))


def brute_cycles(R, pos, q):
    """All q-cycles rooted at their smallest job that the constraint search should find."""
    n = R.shape[0]
    out = []
    for rest in itertools.permutations(range(n), q - 1):
        for first in range(n):
            nodes = (first,) + rest
            if first in rest or min(nodes) != first:
                continue
            edges = [(nodes[i], nodes[(i + 1) % q]) for i in range(q)]
            if all(R[a, b] > 0 for a, b in edges) and sum(pos[a] < pos[b] for a, b in edges) == 1:
                out.append(nodes)
    return sorted(set(out))


def test_find_triangles_trace(trace_inst):
    st = trace_state(trace_inst)
    found = find_cycle_constraints(st, 3, (1, 2, 0))
    assert [c.nodes for c in found] == [(0, 2, 1)]
    assert found[0].beta == 4


def test_find_cycles_zero_matrix():
    st = trace_state(make_instance([1, 1, 1, 1], [1, 1, 1, 1]))
    assert find_cycle_constraints(st, 3, (0, 1, 2, 3)) == []
    assert find_cycle_constraints(st, 4, (0, 1, 2, 3)) == []


@pytest.mark.parametrize("seed", range(30))
@pytest.mark.parametrize("q", [3, 4])
def test_find_cycles_matches_enumeration(seed, q):
    inst = random_instance(seed, 6, 0.2)
    st = trace_state(inst)
    ref = initial_heuristic(inst, seed).order
    pos = np.empty(6, int)
    pos[list(ref)] = range(6)
    found = find_cycle_constraints(st, q, ref)
    assert [c.nodes for c in found] == brute_cycles(st.reduced2, pos, q)
    for c in found:
        assert c.beta2 == min(st.reduced2[a, b] for a, b in c.edges)


def test_two_cycles_never_positive_after_init():
    st = trace_state(random_instance(3, 8, 0.2))
    R = st.reduced2
    assert not np.any((R > 0) & (R.T > 0))


def test_apply_trace(trace_inst):
    st = trace_state(trace_inst)
    c = find_cycle_constraints(st, 3, (1, 2, 0))[0]
    apply_constraint(st, c)
    assert st.lb == 27
    R = st.reduced()
    assert R[2, 1] == 0 and R[1, 0] == 0 and R[0, 2] == INF
    assert min(st.reduced2[a, b] for a, b in c.edges) == 0
    assert st.lb_from_multipliers() == st.lb
    assert st.history == [23, 27]


def test_apply_rejects_zero_beta(trace_inst):
    st = trace_state(trace_inst)
    with pytest.raises(NonPositiveBeta):
        apply_constraint(st, CycleConstraint((0, 2, 1), 0))
    with pytest.raises(NonPositiveBeta):
        apply_constraint(st, CycleConstraint((0, 2, 1), 10))  # exceeds the cycle minimum


def test_extract_trace_after_constraint(trace_inst):
    st = trace_state(trace_inst)
    apply_constraint(st, find_cycle_constraints(st, 3, (1, 2, 0))[0])
    ex = extract_schedule(st, (1, 2, 0))
    assert ex.complete and ex.order == (1, 2, 0)
    assert evaluate_schedule(trace_inst, ex.order).objective == 27


def test_extract_zero_matrix_follows_reference():
    st = trace_state(make_instance([1, 1, 1, 1], [1, 1, 1, 1]))
    assert extract_schedule(st, (2, 0, 3, 1)).order == (2, 0, 3, 1)


def test_extract_trace_after_init_is_stuck(trace_inst):
    ex = extract_schedule(trace_state(trace_inst), (1, 2, 0))
    assert not ex.complete and ex.unscheduled == {0, 1, 2}


def test_blocking_cycle_trace(trace_inst):
    c = find_blocking_cycle(trace_state(trace_inst), {0, 1, 2})
    rotations = {(0, 2, 1), (2, 1, 0), (1, 0, 2)}
    assert c.nodes in rotations and c.beta == 4


def test_blocking_cycle_none_when_acyclic():
    st = trace_state(make_instance([1, 1, 1], [1, 1, 1]))
    assert find_blocking_cycle(st, {0, 1, 2}) is None
    # chain: positive entries are the forbidden ones, which never form a cycle
    chain = make_instance([3, 1, 2], [1, 5, 2], [(0, 1), (1, 2)])
    st = trace_state(chain)
    assert find_blocking_cycle(st, {0, 1, 2}) is None
    assert extract_schedule(st, (0, 1, 2)).order == (0, 1, 2)


def test_upper_bound_trace(trace_inst):
    st = trace_state(trace_inst)
    apply_constraint(st, find_cycle_constraints(st, 3, (1, 2, 0))[0])
    assert upper_bound(st, (1, 2, 0)) == 27 == st.lb
    assert upper_bound(st, (2, 1, 0)) == 31 == evaluate_schedule(trace_inst, (2, 1, 0)).objective
    with pytest.raises(InfeasibleSchedule):
        upper_bound(st, (0, 1, 2))


@pytest.mark.parametrize("seed", range(15))
def test_upper_bound_without_constraints_is_wspt(seed):
    inst = random_instance(seed, 6)
    st = trace_state(inst)
    s = wspt_order(inst)
    assert upper_bound(st, s) == s.objective == st.lb


def synthetic_slack_state():
    # target reduced costs; schedule (0..4); slack cycle 0->2->4->0 with beta = 2
    t = np.zeros((5, 5))
    t[0, 2] = t[2, 4] = 2
    t[4, 0] = 2
    t[2, 1] = t[1, 0] = 2
    t[4, 3] = t[3, 2] = 2
    c = t + 1
    np.fill_diagonal(c, 0)
    st = init_multipliers(CostMatrix(c, 0))
    assert np.array_equal(st.reduced(), t)
    k = CycleConstraint((0, 2, 4), 4)
    apply_constraint(st, k)
    return st, k


def test_strengthen_eta_two_full_transfer():
    st, k = synthetic_slack_state()
    order = (0, 1, 2, 3, 4)
    ub = upper_bound(st, order)
    before = st.lb
    strengthen_by_maxflow(st, k, order)
    assert st.lb - before == k.beta  # (eta - 1) * beta* with eta = 2, beta* = beta
    assert sorted(c.nodes for c in st.constraints) == [(0, 2, 1), (2, 4, 3)]
    assert np.all(st.reduced2 >= 0)
    assert upper_bound(st, order) == ub == st.lb
    st.check()


def test_strengthen_zero_flow_leaves_state(trace_inst):
    st = trace_state(trace_inst)
    k = find_blocking_cycle(st, {0, 1, 2})
    apply_constraint(st, k)
    k = st.constraints[0]
    before = (st.lb, st.reduced2.copy(), list(st.constraints))
    strengthen_by_maxflow(st, k, (2, 1, 0))
    assert st.lb == before[0] and np.array_equal(st.reduced2, before[1])
    assert st.constraints == before[2]


def test_strengthen_requires_triangular(trace_inst):
    st = trace_state(trace_inst)
    k = find_blocking_cycle(st, {0, 1, 2})
    apply_constraint(st, k)
    st.reduced2[1, 2] = 2  # a forward entry that is no longer zero
    with pytest.raises(NotTriangular):
        strengthen_by_maxflow(st, st.constraints[0], (1, 2, 0))


def test_compute_bound_trace(trace_inst):
    trace = []
    res = compute_bound(trace_inst, (1, 2, 0), trace=trace)
    assert res.lb == 27 and res.schedule.order == (1, 2, 0) and res.ub == 27
    assert [(e["event"], e["lb"]) for e in trace] == [("init", 23), ("cycle3", 27)]
    assert trace[1]["beta"] == 4


@pytest.mark.parametrize("seed", range(30))
def test_compute_bound_no_precedence_is_exact(seed):
    inst = random_instance(seed, 2 + seed % 7)
    p, w = inst.proc_times, inst.weights
    closed_form = sum(a * b for a, b in zip(p, w)) + sum(
        min(p[i] * w[j], p[j] * w[i]) for i, j in itertools.combinations(range(len(p)), 2))
    assert trace_state(inst).lb == closed_form == wspt_order(inst).objective
    assert compute_bound(inst, initial_heuristic(inst, seed)).lb == closed_form


def test_compute_bound_chain():
    inst = make_instance([4, 2, 7, 1], [3, 9, 1, 2], [(3, 1), (1, 0), (0, 2)])
    res = compute_bound(inst, (3, 1, 0, 2))
    assert res.lb == res.ub == evaluate_schedule(inst, (3, 1, 0, 2)).objective


def sample_instances(count, seed=0):
    rng = random.Random(seed)
    for _ in range(count):
        n = rng.randint(2, 7)
        yield random_instance(rng.randrange(10**6), n, rng.choice([0.0, 0.2, 0.5]))


@pytest.mark.parametrize("inst", list(sample_instances(60)), ids=lambda i: f"n{i.n_jobs}")
def test_bound_properties(inst):
    ref = initial_heuristic(inst, 1)
    res = compute_bound(inst, ref)
    st = res.state
    st.check()
    opt = brute_force_optimal(inst).objective
    assert st.lb <= opt <= res.ub
    # the upper-bound identity holds for every feasible schedule, not just the extracted one
    for order in linear_extensions(inst.closure):
        assert upper_bound(st, order) == evaluate_schedule(inst, order).objective
    tight = not slack_constraints(st, res.schedule.order)
    assert (st.lb == upper_bound(st, res.schedule)) == tight

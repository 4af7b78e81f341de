"""Lagrangian lower bounds for 1|prec|sum wC via cycle-elimination constraints.

The relaxation works on the ordering variables ``d[n, m]`` (1 iff job ``n``
runs before job ``m``).  Pairwise multipliers are half-integers, so every
quantity inside this module is stored doubled: ``reduced2``, ``alpha2``,
``beta2`` and ``lb2`` are all twice their textbook values and stay integral.
Forbidden orderings carry ``INF`` (IEEE infinity), which is left unchanged by
subtraction and never chosen as a multiplier.

Reduced costs are kept in a float64 array.  Every finite entry is an integer
below 2**53, so subtraction stays exact; ``build_cost_matrix`` checks the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .core import Instance, Schedule, SchedulingError, evaluate_schedule
from .maxflow import FlowNetwork, max_flow

INF = math.inf
_EXACT_LIMIT = 2**52


class BothInfinite(SchedulingError):
    pass


class NonPositiveBeta(SchedulingError):
    pass


class InfeasibleSchedule(SchedulingError):
    pass


class NotTriangular(SchedulingError):
    pass


@dataclass(frozen=True)
class CostMatrix:
    entries: np.ndarray  # c[n, m] = p_n * w_m, or INF when m must precede n
    base: int  # sum of p_m * w_m

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class CycleConstraint:
    """``sum of d over the cycle >= 1`` for the cycle nodes[0] -> nodes[1] -> ... -> nodes[0]."""

    nodes: tuple[int, ...]
    beta2: int = 0

    def __post_init__(self):
        if len(self.nodes) < 2 or len(set(self.nodes)) != len(self.nodes):
            raise ValueError(f"not a simple cycle: {self.nodes}")
        if self.beta2 < 0:
            raise NonPositiveBeta(f"negative multiplier on {self.nodes}")

    @property
    def edges(self) -> list[tuple[int, int]]:
        q = len(self.nodes)
        return [(self.nodes[i], self.nodes[(i + 1) % q]) for i in range(q)]

    @property
    def beta(self) -> Fraction:
        return Fraction(self.beta2, 2)

    def with_beta2(self, beta2: int) -> "CycleConstraint":
        return CycleConstraint(self.nodes, beta2)

    def active_count(self, pos: Sequence[int]) -> int:
        return sum(1 for n, m in self.edges if pos[n] < pos[m])


@dataclass
class LagrangianState:
    cost: CostMatrix
    alpha2: np.ndarray
    reduced2: np.ndarray
    constraints: list = field(default_factory=list)
    lb2: int = 0  # doubled sum of multipliers, excluding the constant term
    history: list = field(default_factory=list)  # lb after each operation

    @property
    def n(self) -> int:
        return self.reduced2.shape[0]

    @property
    def base(self) -> int:
        return self.cost.base

    @property
    def r(self) -> int:
        return len(self.constraints)

    @property
    def lb(self) -> int:
        assert self.lb2 % 2 == 0, "doubled bound lost parity"
        return self.base + self.lb2 // 2

    def reduced(self) -> np.ndarray:
        """Reduced costs in undoubled units."""
        return self.reduced2 / 2

    def lb_from_multipliers(self) -> Fraction:
        """Recompute the bound as sum(alpha) + sum(beta) + sum(p*w)."""
        off = ~np.eye(self.n, dtype=bool)
        alphas = int(self.alpha2[off].sum())
        betas = sum(c.beta2 for c in self.constraints)
        return Fraction(alphas + betas, 2) + self.base

    def copy(self) -> "LagrangianState":
        return LagrangianState(self.cost, self.alpha2, self.reduced2.copy(), list(self.constraints),
                               self.lb2, list(self.history))

    def check(self):
        """Assert the state invariants (used by tests and the verifier)."""
        off = ~np.eye(self.n, dtype=bool)
        assert np.all(self.reduced2[off] >= 0), "negative reduced cost"
        assert self.lb_from_multipliers() == self.lb, "bound differs from multiplier sum"
        assert all(a <= b for a, b in zip(self.history, self.history[1:])), "bound decreased"

    def _record(self):
        self.history.append(self.lb)


def build_cost_matrix(inst: Instance) -> CostMatrix:
    p = np.asarray(inst.proc_times, dtype=np.int64)
    w = np.asarray(inst.weights, dtype=np.int64)
    c = np.outer(p, w).astype(float)
    if c.size and c.max() * 2 >= _EXACT_LIMIT:
        raise SchedulingError("cost entries too large for exact arithmetic")
    # c[n, m] is infinite when m is a (transitive) predecessor of n
    c[inst.closure.T] = INF
    np.fill_diagonal(c, 0)
    c.setflags(write=False)
    return CostMatrix(c, int(np.dot(p, w)))


def init_multipliers(C: CostMatrix) -> LagrangianState:
    c = C.entries
    both = np.isinf(c) & np.isinf(c.T)
    if both.any():
        n, m = np.argwhere(both)[0]
        raise BothInfinite(f"pair ({n}, {m}) forbidden in both directions")
    alpha2 = np.minimum(c, c.T)  # 2 * alpha
    np.fill_diagonal(alpha2, 0)
    reduced2 = 2 * c - 2 * alpha2
    np.fill_diagonal(reduced2, 0)
    alpha2.setflags(write=False)
    state = LagrangianState(C, alpha2, reduced2, [], int(alpha2.sum()))
    state._record()
    return state


def _positions(order: Sequence[int], n: int) -> np.ndarray:
    pos = np.empty(n, dtype=np.int64)
    pos[list(order)] = np.arange(n)
    return pos


def _cyclic_components(positive: np.ndarray) -> list[np.ndarray]:
    n_comp, labels = connected_components(positive, directed=True, connection="strong")
    comps = []
    for k in range(n_comp):
        members = np.flatnonzero(labels == k)
        if len(members) > 1:
            comps.append(members)
    return comps


def _order_of(reference) -> Sequence[int]:
    return reference.order if isinstance(reference, Schedule) else reference


def find_cycle_constraints(state: LagrangianState, max_len: int, reference) -> list[CycleConstraint]:
    """Positive-cost cycles of length ``max_len`` that the reference order meets with equality.

    Cycles are rooted at their smallest job and returned in lexicographic order.
    """
    if max_len not in (3, 4):
        raise ValueError("only 3- and 4-edge cycles are enumerated")
    R = state.reduced2
    n = state.n
    positive = R > 0
    np.fill_diagonal(positive, False)
    pos = _positions(_order_of(reference), n)
    out = []
    for members in _cyclic_components(positive):
        P = positive[np.ix_(members, members)]
        F = (pos[members][:, None] < pos[members][None, :]).astype(np.int8)
        k = len(members)
        idx = np.arange(k)
        if max_len == 3:
            # a -> b -> c -> a, a smallest
            T = P[:, :, None] & P[None, :, :] & P.T[:, None, :]
            cnt = F[:, :, None] + F[None, :, :] + F.T[:, None, :]
            T &= cnt == 1
            T &= (idx[None, :, None] > idx[:, None, None]) & (idx[None, None, :] > idx[:, None, None])
            for a, b, c in np.argwhere(T):
                nodes = (int(members[a]), int(members[b]), int(members[c]))
                out.append(CycleConstraint(nodes, _cycle_min(R, nodes)))
        else:
            for a in range(k):
                rest = idx[idx > a]
                if len(rest) < 3:
                    continue
                Pr = P[np.ix_(rest, rest)]
                Fr = F[np.ix_(rest, rest)]
                into = P[rest, a]  # x -> a
                out_a = P[a, rest]  # a -> x
                # a -> b -> c -> d -> a
                Q = out_a[:, None, None] & Pr[:, :, None] & Pr[None, :, :] & into[None, None, :]
                cnt = (F[a, rest][:, None, None] + Fr[:, :, None] + Fr[None, :, :]
                       + F[rest, a][None, None, :])
                Q &= cnt == 1
                j = np.arange(len(rest))
                Q &= (j[:, None, None] != j[None, None, :])
                for b, c, d in np.argwhere(Q):
                    nodes = (int(members[a]), int(members[rest[b]]), int(members[rest[c]]),
                             int(members[rest[d]]))
                    out.append(CycleConstraint(nodes, _cycle_min(R, nodes)))
    out.sort(key=lambda cc: cc.nodes)
    return out


def _cycle_min(R: np.ndarray, nodes: Sequence[int]) -> int:
    q = len(nodes)
    v = min(R[nodes[i], nodes[(i + 1) % q]] for i in range(q))
    if v == INF:
        raise SchedulingError(f"cycle {nodes} uses only forbidden orderings")
    return int(v)


def apply_constraint(state: LagrangianState, c: CycleConstraint) -> LagrangianState:
    """Relax ``c`` into the Lagrangian, in place.  ``c.beta2`` must equal the cycle minimum."""
    if c.beta2 <= 0:
        raise NonPositiveBeta(f"multiplier {c.beta} on {c.nodes}")
    R = state.reduced2
    if _cycle_min(R, c.nodes) < c.beta2:
        raise NonPositiveBeta(f"multiplier {c.beta} exceeds reduced costs on {c.nodes}")
    for n, m in c.edges:
        R[n, m] -= c.beta2
    state.constraints.append(c)
    state.lb2 += c.beta2
    state._record()
    return state


@dataclass
class Extraction:
    front: list
    back: list  # filled from the end: back[0] is the last job
    unscheduled: set

    @property
    def complete(self) -> bool:
        return not self.unscheduled

    @property
    def order(self) -> tuple[int, ...]:
        if self.unscheduled:
            raise SchedulingError("extraction incomplete")
        return tuple(self.front) + tuple(reversed(self.back))


def extract_schedule(state: LagrangianState, reference, partial: Extraction | None = None) -> Extraction:
    """Place jobs whose remaining row (front) or column (back) of reduced costs is all zero.

    Front ties go to the job earliest in the reference order, back ties to the latest.
    """
    n = state.n
    rank = _positions(_order_of(reference), n)
    ex = partial or Extraction([], [], set(range(n)))
    zero = state.reduced2 == 0
    np.fill_diagonal(zero, True)
    remaining = np.zeros(n, dtype=bool)
    remaining[list(ex.unscheduled)] = True
    while remaining.any():
        rem = np.flatnonzero(remaining)
        sub = zero[np.ix_(rem, rem)]
        front = rem[sub.all(axis=1)]
        if len(front):
            j = int(front[np.argmin(rank[front])])
            ex.front.append(j)
        else:
            back = rem[sub.all(axis=0)]
            if not len(back):
                break
            j = int(back[np.argmax(rank[back])])
            ex.back.append(j)
        remaining[j] = False
        ex.unscheduled.discard(j)
    return ex


def find_blocking_cycle(state: LagrangianState, unscheduled) -> CycleConstraint | None:
    """Shortest positive-cost cycle through the least-connected unscheduled job."""
    jobs = sorted(unscheduled)
    if not jobs:
        return None
    R = state.reduced2
    sub = R[np.ix_(jobs, jobs)] > 0
    np.fill_diagonal(sub, False)
    succ = [np.flatnonzero(sub[i]).tolist() for i in range(len(jobs))]
    for s in sorted(range(len(jobs)), key=lambda i: (len(succ[i]), jobs[i])):
        parent = {s: None}
        frontier = [s]
        found = None
        while frontier and found is None:
            nxt = []
            for u in frontier:
                for v in succ[u]:
                    if v == s:
                        found = u
                        break
                    if v not in parent:
                        parent[v] = u
                        nxt.append(v)
                if found is not None:
                    break
            frontier = nxt
        if found is None:
            continue
        path = [found]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        nodes = tuple(jobs[i] for i in reversed(path))
        return CycleConstraint(nodes, _cycle_min(R, nodes))
    return None


def residual_cost2(state: LagrangianState, order: Sequence[int]) -> float:
    """Doubled sum of reduced costs on the pairs an order puts forward."""
    pos = _positions(order, state.n)
    fwd = pos[:, None] < pos[None, :]
    return float(state.reduced2[fwd].sum())


def upper_bound(state: LagrangianState, schedule) -> int:
    """Objective of ``schedule`` rebuilt from the multipliers.

    lb + sum(beta * (active edges - 1)) + the reduced cost the schedule still pays.
    The last term vanishes for schedules extracted from the reduced matrix.
    """
    order = _order_of(schedule)
    pos = _positions(order, state.n)
    if np.isinf(state.cost.entries[pos[:, None] < pos[None, :]]).any():
        raise InfeasibleSchedule(f"order {tuple(order)} violates precedence")
    slack2 = sum(c.beta2 * (c.active_count(pos) - 1) for c in state.constraints)
    total2 = state.lb2 + slack2 + residual_cost2(state, order)
    assert total2 % 2 == 0
    return state.base + int(total2) // 2


def slack_constraints(state: LagrangianState, order: Sequence[int]) -> list[CycleConstraint]:
    pos = _positions(order, state.n)
    return [c for c in state.constraints if c.active_count(pos) >= 2]


def strengthen_by_maxflow(state: LagrangianState, slack: CycleConstraint, schedule) -> LagrangianState:
    """Trade a slack constraint for cycles found as augmenting paths, in place.

    Each forward edge (n, m) of ``slack`` seeds a flow network on the jobs
    scheduled between n and m, whose arcs are the backward pairs with positive
    reduced cost.  Every source-sink path closes a new cycle through (n, m).
    With eta forward edges each able to route beta*, the bound rises by
    (eta - 1) * beta*.
    """
    order = tuple(_order_of(schedule))
    n_jobs = state.n
    pos = _positions(order, n_jobs)
    R = state.reduced2
    fwd = pos[:, None] < pos[None, :]
    if np.any(R[fwd] != 0):
        raise NotTriangular("schedule was not extracted from the current reduced matrix")
    try:
        k = next(i for i, c in enumerate(state.constraints) if c is slack)
    except StopIteration:
        k = state.constraints.index(slack)
    active = [(a, b) for a, b in slack.edges if pos[a] < pos[b]]
    if len(active) < 2:
        return state

    work = R.copy()
    routed = []
    for a, b in active:
        net = FlowNetwork(source=b, sink=a, source_cap=slack.beta2)
        segment = order[pos[a]:pos[b] + 1]
        for hi in range(len(segment) - 1, 0, -1):
            i = segment[hi]
            for lo in range(hi - 1, -1, -1):
                j = segment[lo]
                if work[i, j] > 0:
                    net.add_arc(i, j, work[i, j])
        res = max_flow(net)
        for (i, j), f in res.flow.items():
            work[i, j] -= f
        routed.append((a, b, res))
    beta_star2 = int(min(res.value for _, _, res in routed))
    if beta_star2 <= 0:
        return state

    new_cycles = []
    for a, b, res in routed:
        need = beta_star2
        for path, amount in res.paths:
            if need == 0:
                break
            take = int(min(amount, need))
            need -= take
            new_cycles.append(CycleConstraint((a,) + tuple(path[:-1]), take))
    # release the slack constraint, keep beta - beta* of it, then charge the new cycles
    for i, j in slack.edges:
        R[i, j] += beta_star2
    for c in new_cycles:
        for i, j in c.edges:
            R[i, j] -= c.beta2
    rest = slack.beta2 - beta_star2
    if rest:
        state.constraints[k] = slack.with_beta2(rest)
    else:
        del state.constraints[k]
    state.constraints.extend(new_cycles)
    state.lb2 += (len(active) - 1) * beta_star2
    state._record()
    return state


@dataclass
class BoundResult:
    state: LagrangianState
    extraction: Extraction
    schedule: Schedule | None

    @property
    def lb(self) -> int:
        return self.state.lb

    @property
    def ub(self) -> int | None:
        return self.schedule.objective if self.schedule else None


def _trace(trace, event: str, state: LagrangianState, c: CycleConstraint | None = None):
    if trace is None:
        return
    rec = {"event": event, "lb": state.lb, "r": state.r}
    if c is not None:
        rec["edges"] = c.edges
        rec["beta"] = c.beta
    trace.append(rec)


def compute_bound(inst: Instance, reference, replay: Sequence[CycleConstraint] = (),
                  trace: list | None = None, strengthen: bool = True) -> BoundResult:
    """Full bounding pipeline for one search node.

    ``replay`` re-applies constraints inherited from a parent node, with each
    multiplier clipped to what the node's reduced matrix still allows.
    """
    state = init_multipliers(build_cost_matrix(inst))
    _trace(trace, "init", state)
    ref = _order_of(reference)

    def try_apply(c: CycleConstraint, event: str):
        beta2 = min(c.beta2, _cycle_min(state.reduced2, c.nodes))
        if beta2 > 0:
            c = c.with_beta2(beta2)
            apply_constraint(state, c)
            _trace(trace, event, state, c)

    for c in replay:
        try_apply(c, "replay")
    for q in (3, 4):
        for c in find_cycle_constraints(state, q, ref):
            try_apply(c, f"cycle{q}")

    ex = extract_schedule(state, ref)
    while not ex.complete:
        c = find_blocking_cycle(state, ex.unscheduled)
        if c is None:
            raise SchedulingError("no schedule and no positive cycle; reduced matrix corrupted")
        apply_constraint(state, c)
        _trace(trace, "blocking", state, c)
        ex = extract_schedule(state, ref, ex)

    order = ex.order
    if strengthen:
        for c in slack_constraints(state, order):
            if any(c is d for d in state.constraints) and c.active_count(_positions(order, state.n)) >= 2:
                before = state.lb2
                strengthen_by_maxflow(state, c, order)
                if state.lb2 != before:
                    _trace(trace, "maxflow", state, c)
    return BoundResult(state, ex, evaluate_schedule(inst, order))

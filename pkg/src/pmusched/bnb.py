"""Heuristics and depth-first branch and bound on top of the Lagrangian bound."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import Instance, PrecedenceRelation, Schedule, evaluate_schedule, is_feasible
from .lagrangian import (
    BoundResult,
    LagrangianState,
    _positions,
    compute_bound,
    slack_constraints,
)


def initial_heuristic(inst: Instance, seed: int) -> Schedule:
    """Random linear extension: repeatedly pick an available job uniformly."""
    rng = random.Random(seed)
    closure = inst.closure
    indeg = closure.sum(axis=0).astype(int).tolist()
    avail = [j for j in range(inst.n_jobs) if indeg[j] == 0]
    order = []
    while avail:
        j = avail.pop(rng.randrange(len(avail)))
        order.append(j)
        for k in np.flatnonzero(closure[j]):
            indeg[k] -= 1
            if indeg[k] == 0:
                avail.append(int(k))
        avail.sort()
    return evaluate_schedule(inst, order)


def _groups(closure: np.ndarray, order: Sequence[int]) -> list[tuple[int, int]]:
    """Maximal runs [start, end) whose neighbours are precedence-linked."""
    runs = []
    start = 0
    for k in range(1, len(order) + 1):
        if k == len(order) or not closure[order[k - 1], order[k]]:
            runs.append((start, k))
            start = k
    return runs


def improve_schedule(inst: Instance, s: Schedule) -> Schedule:
    """First-improvement reinsertion of precedence-linked groups until no move helps."""
    closure = inst.closure
    order = list(s.order)
    best = evaluate_schedule(inst, order).objective
    improved = True
    while improved:
        improved = False
        for a, b in _groups(closure, order):
            group = order[a:b]
            rest = order[:a] + order[b:]
            for at in range(len(rest) + 1):
                if at == a:
                    continue
                cand = rest[:at] + group + rest[at:]
                if not is_feasible(inst, cand):
                    continue
                obj = evaluate_schedule(inst, cand).objective
                if obj < best:
                    order, best, improved = cand, obj, True
                    break
            if improved:
                break
    return evaluate_schedule(inst, order)


def greedy_baseline(inst: Instance) -> Schedule:
    """Among jobs with no unscheduled predecessor, take the heaviest (ties: smallest index)."""
    closure = inst.closure
    indeg = closure.sum(axis=0).astype(int).tolist()
    done = [False] * inst.n_jobs
    order = []
    for _ in range(inst.n_jobs):
        j = min((k for k in range(inst.n_jobs) if not done[k] and indeg[k] == 0),
                key=lambda k: (-inst.weights[k], k))
        done[j] = True
        order.append(j)
        for k in np.flatnonzero(closure[j]):
            indeg[k] -= 1
    return evaluate_schedule(inst, order)


def select_branch_variable(state: LagrangianState, schedule, prec: PrecedenceRelation):
    """Pick (n, m) with n before m in the schedule from the largest slack constraint."""
    order = schedule.order if isinstance(schedule, Schedule) else schedule
    pos = _positions(order, state.n)
    slack = slack_constraints(state, order)
    # stable sort keeps application order among equal multipliers
    for c in sorted(slack, key=lambda c: -c.beta2):
        for n, m in c.edges:
            if pos[n] < pos[m] and not prec.related(n, m):
                return n, m
    return None


def _repair(inst: Instance, order: Sequence[int]) -> list[int]:
    """Topological sort that follows ``order`` wherever precedence allows."""
    rank = {j: k for k, j in enumerate(order)}
    closure = inst.closure
    indeg = closure.sum(axis=0).astype(int).tolist()
    avail = sorted((j for j in range(inst.n_jobs) if indeg[j] == 0), key=rank.get)
    out = []
    while avail:
        j = avail.pop(0)
        out.append(j)
        for k in np.flatnonzero(closure[j]):
            indeg[k] -= 1
            if indeg[k] == 0:
                avail.append(int(k))
        avail.sort(key=rank.get)
    return out


@dataclass(frozen=True)
class BnbNode:
    fixed_pairs: frozenset = frozenset()
    depth: int = 0
    constraints: tuple = ()  # inherited multipliers, replayed from the node's C^(0)
    parent_lb: int = 0
    reference: tuple = ()


@dataclass(frozen=True)
class SolveResult:
    best_schedule: Schedule
    best_objective: int
    global_lb: int
    nodes_explored: int
    proven_optimal: bool
    wall_time: float  # milliseconds
    limit_hit: str | None = None
    root_lb: int = 0


def solve(inst: Instance, node_cap: int | None = None, time_cap_ms: float | None = None,
          seed: int = 0, observer: Callable[[BnbNode, Instance, BoundResult], None] | None = None,
          trace: list | None = None) -> SolveResult:
    """Depth-first active-node search.

    A node holds only its extra precedence pairs and the constraint list it
    inherited; the reduced matrix is rebuilt from the node's cost matrix.
    ``observer`` sees every bounded node (used for invariant checks).
    """
    t0 = time.perf_counter()
    start = improve_schedule(inst, initial_heuristic(inst, seed))
    incumbent = start
    stack = [BnbNode(reference=start.order)]
    explored = 0
    root_lb = None
    limit_hit = None

    while stack:
        if node_cap is not None and explored >= node_cap:
            limit_hit = "node-limit"
            break
        if time_cap_ms is not None and (time.perf_counter() - t0) * 1000 >= time_cap_ms:
            limit_hit = "time-limit"
            break
        node = stack.pop()
        if node.depth and node.parent_lb >= incumbent.objective:
            continue
        sub = inst.with_precedence(node.fixed_pairs) if node.fixed_pairs else inst
        ref = evaluate_schedule(sub, _repair(sub, node.reference))
        ref = improve_schedule(sub, ref)
        bound = compute_bound(sub, ref, replay=node.constraints,
                              trace=trace if node.depth == 0 else None)
        explored += 1
        if observer is not None:
            observer(node, sub, bound)
        lb = bound.lb
        if root_lb is None:
            root_lb = lb
        if bound.schedule.objective < incumbent.objective:
            incumbent = evaluate_schedule(inst, bound.schedule.order)
        if ref.objective < incumbent.objective:
            incumbent = evaluate_schedule(inst, ref.order)
        if lb >= incumbent.objective:
            continue
        pick = select_branch_variable(bound.state, bound.schedule, sub.relation)
        if pick is None:
            pick = _fallback_pair(sub, bound.schedule.order)
        n, m = pick
        constraints = tuple(bound.state.constraints)
        child = dict(depth=node.depth + 1, constraints=constraints, parent_lb=lb,
                     reference=bound.schedule.order)
        # pushed in reverse so "m before n" is explored first
        stack.append(BnbNode(node.fixed_pairs | {(n, m)}, **child))
        stack.append(BnbNode(node.fixed_pairs | {(m, n)}, **child))

    if limit_hit is None:
        global_lb = incumbent.objective
    else:
        pending = [nd.parent_lb for nd in stack]
        global_lb = min([incumbent.objective] + pending)
    return SolveResult(
        best_schedule=incumbent,
        best_objective=incumbent.objective,
        global_lb=global_lb,
        nodes_explored=explored,
        proven_optimal=limit_hit is None,
        wall_time=(time.perf_counter() - t0) * 1000,
        limit_hit=limit_hit,
        root_lb=root_lb if root_lb is not None else global_lb,
    )


def _fallback_pair(inst: Instance, order: Sequence[int]) -> tuple[int, int]:
    # only reachable if the bound left a gap without a slack constraint
    for a, b in zip(order, order[1:]):
        if not inst.relation.related(a, b):
            return a, b
    for i, a in enumerate(order):
        for b in order[i + 1:]:
            if not inst.relation.related(a, b):
                return a, b
    raise AssertionError("gap remains on a totally ordered node")


def node_violations(sub: Instance, bound: BoundResult) -> list[str]:
    """Invariant breaches at one search node; empty when the node is sound."""
    from .lagrangian import upper_bound

    out = []
    state = bound.state
    off = ~np.eye(state.n, dtype=bool)
    if np.any(state.reduced2[off] < 0):
        out.append("negative reduced cost")
    if state.lb_from_multipliers() != state.lb:
        out.append("bound differs from multiplier sum")
    if any(b < a for a, b in zip(state.history, state.history[1:])):
        out.append("bound decreased during the pipeline")
    s = bound.schedule
    if not is_feasible(sub, s.order):
        out.append("extracted schedule infeasible")
    elif upper_bound(state, s) != s.objective:
        out.append("upper bound formula disagrees with the objective")
    if state.lb > s.objective:
        out.append("lower bound above extracted schedule")
    return out

"""Problem model for single-machine weighted completion time scheduling with precedence.

Jobs are indexed ``0..n-1`` inside the library.  The JSON instance format uses
1-based indices, matching PMU numbering in reports.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BRUTE_FORCE_CAP = 10
PROC_TIME_RANGE = (1, 50)


class SchedulingError(ValueError):
    pass


class CyclicPrecedence(SchedulingError):
    def __init__(self, cycle: Sequence[int]):
        self.cycle = list(cycle)
        super().__init__(f"precedence graph contains a cycle: {' -> '.join(map(str, self.cycle))}")


class NonPositiveProcTime(SchedulingError):
    pass


class NegativeWeight(SchedulingError):
    pass


class BadJobIndex(SchedulingError):
    pass


class NotAPermutation(SchedulingError):
    pass


class HasPrecedence(SchedulingError):
    pass


class TooLarge(SchedulingError):
    pass


@dataclass(frozen=True)
class PrecedenceRelation:
    """Raw precedence pairs plus their transitive closure.

    ``closure[i, j]`` is True iff job ``i`` must complete before job ``j``.
    """

    closure: np.ndarray
    raw_edges: frozenset

    def __post_init__(self):
        self.closure.setflags(write=False)

    @property
    def n(self) -> int:
        return self.closure.shape[0]

    def related(self, i: int, j: int) -> bool:
        return bool(self.closure[i, j] or self.closure[j, i])

    def pairs(self) -> list[tuple[int, int]]:
        return [tuple(map(int, ij)) for ij in np.argwhere(self.closure)]


def _find_cycle(n: int, edges: Iterable[tuple[int, int]]) -> list[int] | None:
    succ = [[] for _ in range(n)]
    for i, j in sorted(edges):
        succ[i].append(j)
    color = [0] * n  # 0 new, 1 on stack, 2 done
    parent = [-1] * n
    for root in range(n):
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            for u in it:
                if color[u] == 0:
                    color[u] = 1
                    parent[u] = v
                    stack.append((u, iter(succ[u])))
                    break
                if color[u] == 1:
                    path = [v]
                    while path[-1] != u:
                        path.append(parent[path[-1]])
                    return path[::-1] + [u]
            else:
                color[v] = 2
                stack.pop()
    return None


def transitive_closure(edges: Iterable[tuple[int, int]], n: int) -> PrecedenceRelation:
    edges = frozenset((int(i), int(j)) for i, j in edges)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise BadJobIndex(f"pair ({i}, {j}) out of range for {n} jobs")
        if i == j:
            raise CyclicPrecedence([i, i])
    cycle = _find_cycle(n, edges)
    if cycle is not None:
        raise CyclicPrecedence(cycle)
    reach = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        reach[i, j] = True
    # Warshall; n is small enough that the O(n^3) boolean sweep is cheap.
    for k in range(n):
        reach |= np.outer(reach[:, k], reach[k, :])
    return PrecedenceRelation(reach, edges)


@dataclass(frozen=True)
class Instance:
    proc_times: tuple[int, ...]
    weights: tuple[int, ...]
    precedence: frozenset = frozenset()
    labels: tuple[str, ...] | None = None

    @property
    def n_jobs(self) -> int:
        return len(self.proc_times)

    @cached_property
    def relation(self) -> PrecedenceRelation:
        return transitive_closure(self.precedence, self.n_jobs)

    @property
    def closure(self) -> np.ndarray:
        return self.relation.closure

    def with_precedence(self, extra: Iterable[tuple[int, int]]) -> "Instance":
        return Instance(self.proc_times, self.weights, self.precedence | frozenset(extra), self.labels)

    def label(self, j: int) -> str:
        return self.labels[j] if self.labels else str(j + 1)


def make_instance(p: Sequence[int], w: Sequence[int], prec: Iterable[tuple[int, int]] = (),
                  labels: Sequence[str] | None = None) -> Instance:
    """Build and validate an instance from plain sequences (0-based pairs)."""
    return validate_instance(Instance(tuple(int(x) for x in p), tuple(int(x) for x in w),
                                      frozenset((int(i), int(j)) for i, j in prec),
                                      tuple(labels) if labels is not None else None))


def validate_instance(raw: Instance) -> Instance:
    n = raw.n_jobs
    if len(raw.weights) != n:
        raise SchedulingError(f"{len(raw.weights)} weights for {n} jobs")
    if raw.labels is not None and len(raw.labels) != n:
        raise SchedulingError(f"{len(raw.labels)} labels for {n} jobs")
    for j, p in enumerate(raw.proc_times):
        if p <= 0:
            raise NonPositiveProcTime(f"job {j} has processing time {p}")
    for j, w in enumerate(raw.weights):
        if w < 0:
            raise NegativeWeight(f"job {j} has weight {w}")
    raw.relation  # raises BadJobIndex / CyclicPrecedence
    return raw


@dataclass(frozen=True)
class Schedule:
    order: tuple[int, ...]
    completions: tuple[int, ...]
    objective: int
    frame_length: int = field(default=0)


def _check_permutation(n: int, order: Sequence[int]) -> tuple[int, ...]:
    order = tuple(int(j) for j in order)
    if sorted(order) != list(range(n)):
        raise NotAPermutation(f"{order} is not a permutation of 0..{n - 1}")
    return order


def evaluate_schedule(inst: Instance, order: Sequence[int]) -> Schedule:
    order = _check_permutation(inst.n_jobs, order)
    completions = [0] * inst.n_jobs
    t = 0
    objective = 0
    for j in order:
        t += inst.proc_times[j]
        completions[j] = t
        objective += inst.weights[j] * t
    return Schedule(order, tuple(completions), objective, t)


def is_feasible(inst: Instance, order: Sequence[int]) -> bool:
    pos = np.empty(inst.n_jobs, dtype=int)
    pos[list(order)] = np.arange(inst.n_jobs)
    i, j = np.nonzero(inst.closure)
    return bool(np.all(pos[i] < pos[j]))


def wspt_order(inst: Instance) -> Schedule:
    """Smith's rule: sort by w/p descending, ties to the smaller index."""
    if inst.precedence:
        raise HasPrecedence("WSPT is only optimal without precedence constraints")
    key = lambda j: (-Fraction(inst.weights[j], inst.proc_times[j]), j)
    return evaluate_schedule(inst, sorted(range(inst.n_jobs), key=key))


def linear_extensions(closure: np.ndarray) -> Iterable[tuple[int, ...]]:
    """Yield every permutation consistent with ``closure`` in lexicographic order."""
    n = closure.shape[0]
    preds = [frozenset(np.nonzero(closure[:, j])[0].tolist()) for j in range(n)]
    prefix: list[int] = []
    placed: set[int] = set()

    def rec():
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for j in range(n):
            if j not in placed and preds[j] <= placed:
                prefix.append(j)
                placed.add(j)
                yield from rec()
                placed.discard(j)
                prefix.pop()

    yield from rec()


def count_linear_extensions(closure: np.ndarray) -> int:
    n = closure.shape[0]
    pred_mask = [sum(1 << i for i in np.nonzero(closure[:, j])[0].tolist()) for j in range(n)]
    ways = [0] * (1 << n)
    ways[0] = 1
    for s in range(1 << n):
        if not ways[s]:
            continue
        for j in range(n):
            if not s >> j & 1 and pred_mask[j] & s == pred_mask[j]:
                ways[s | 1 << j] += ways[s]
    return ways[-1]


def brute_force_optimal(inst: Instance) -> Schedule:
    if inst.n_jobs > BRUTE_FORCE_CAP:
        raise TooLarge(f"brute force limited to {BRUTE_FORCE_CAP} jobs, got {inst.n_jobs}")
    best = None
    # lexicographic enumeration + strict improvement keeps the smallest order on ties
    for order in linear_extensions(inst.closure):
        s = evaluate_schedule(inst, order)
        if best is None or s.objective < best.objective:
            best = s
    return best


def random_instance(seed: int, n: int, density: float = 0.0, weight_max: int = 10) -> Instance:
    if n < 1:
        raise SchedulingError("need at least one job")
    rng = random.Random(seed)
    lo, hi = PROC_TIME_RANGE
    p = [rng.randint(lo, hi) for _ in range(n)]
    w = [rng.randint(1, weight_max) for _ in range(n)]
    prec = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < density]
    return make_instance(p, w, prec)


def frame_stats(inst: Instance) -> tuple[int, Fraction]:
    t = sum(inst.proc_times)
    return t, Fraction(t, inst.n_jobs)


def instance_to_dict(inst: Instance) -> dict:
    d = {
        "n": inst.n_jobs,
        "p": list(inst.proc_times),
        "w": list(inst.weights),
        "prec": [[i + 1, j + 1] for i, j in sorted(inst.precedence)],
    }
    if inst.labels is not None:
        d["labels"] = list(inst.labels)
    return d


def instance_from_dict(d: dict) -> Instance:
    try:
        n = int(d["n"])
        p, w = d["p"], d["w"]
        prec = [(int(i) - 1, int(j) - 1) for i, j in d.get("prec", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchedulingError(f"malformed instance object: {exc}") from exc
    if len(p) != n:
        raise SchedulingError(f"n={n} but {len(p)} processing times")
    return make_instance(p, w, prec, d.get("labels"))


def load_instance(path: str | Path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchedulingError(f"{path}: {exc}") from exc
    return instance_from_dict(d)


def dump_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst)) + "\n"

"""Minimum PMU placement for topological observability.

A PMU observes its own bus and every adjacent bus, so a placement is a
dominating set of the network graph.  The exact search runs in two phases:
branch and bound for the minimum cardinality, then a lexicographic sweep that
returns the smallest bus-id sequence of that cardinality.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .network import PowerNetwork


@dataclass(frozen=True)
class Placement:
    pmu_buses: tuple[int, ...]
    optimal: bool = True
    nodes: int = 0

    @property
    def n(self) -> int:
        return len(self.pmu_buses)


class _Budget(Exception):
    pass


class _Cover:
    def __init__(self, net: PowerNetwork, node_cap, time_cap_s):
        self.ids = net.bus_ids
        pos = {b: i for i, b in enumerate(self.ids)}
        adj = net.adjacency()
        self.closed = [0] * len(self.ids)
        for b, nbrs in adj.items():
            mask = 1 << pos[b]
            for v in nbrs:
                mask |= 1 << pos[v]
            self.closed[pos[b]] = mask
        self.full = (1 << len(self.ids)) - 1
        self.nodes = 0
        self.node_cap = node_cap
        self.deadline = time.perf_counter() + time_cap_s if time_cap_s else None

    def tick(self):
        self.nodes += 1
        if self.node_cap is not None and self.nodes > self.node_cap:
            raise _Budget
        if self.deadline is not None and self.nodes % 256 == 0 and time.perf_counter() > self.deadline:
            raise _Budget

    def candidates(self, u: int, allowed: int) -> int:
        return self.closed[u] & allowed

    def lower_bound(self, uncovered: int, allowed: int) -> int:
        """Max of a disjoint-neighbourhood packing and a coverage-count bound."""
        if not uncovered:
            return 0
        verts = _bits(uncovered)
        verts.sort(key=lambda u: (self.candidates(u, allowed)).bit_count())
        used = 0
        packing = 0
        for u in verts:
            cand = self.candidates(u, allowed)
            if not cand & used:
                used |= cand
                packing += 1
        best_gain = max((self.closed[v] & uncovered).bit_count() for v in _bits(allowed)) if allowed else 0
        if best_gain == 0:
            return len(verts) + len(self.ids)  # uncoverable
        counting = -(-uncovered.bit_count() // best_gain)
        return max(packing, counting)

    def greedy(self) -> list[int]:
        uncovered = self.full
        chosen = []
        while uncovered:
            v = max(range(len(self.ids)), key=lambda v: ((self.closed[v] & uncovered).bit_count(), -v))
            chosen.append(v)
            uncovered &= ~self.closed[v]
        return sorted(chosen)

    def minimum(self, upper: list[int]) -> list[int]:
        best = list(upper)

        def rec(uncovered: int, allowed: int, chosen: list[int]):
            nonlocal best
            self.tick()
            if not uncovered:
                if len(chosen) < len(best):
                    best = sorted(chosen)
                return
            if len(chosen) + self.lower_bound(uncovered, allowed) >= len(best):
                return
            u = min(_bits(uncovered), key=lambda u: (self.candidates(u, allowed).bit_count(), u))
            cands = _bits(self.candidates(u, allowed))
            cands.sort(key=lambda v: (-(self.closed[v] & uncovered).bit_count(), v))
            for v in cands:
                chosen.append(v)
                rec(uncovered & ~self.closed[v], allowed & ~(1 << v), chosen)
                chosen.pop()
                allowed &= ~(1 << v)

        rec(self.full, self.full, [])
        return best

    def lex_smallest(self, k: int) -> list[int]:
        """Lexicographically smallest dominating set with exactly ``k`` buses."""
        n = len(self.ids)
        # suffix[i]: buses with index >= i, still open for selection
        suffix = [self.full & ~((1 << i) - 1) for i in range(n + 1)]

        def rec(i: int, uncovered: int, chosen: list[int]):
            self.tick()
            if not uncovered:
                return list(chosen)
            if len(chosen) == k or i == n:
                return None
            allowed = suffix[i]
            for u in _bits(uncovered):
                if not self.closed[u] & allowed:
                    return None
            if len(chosen) + self.lower_bound(uncovered, allowed) > k:
                return None
            chosen.append(i)
            found = rec(i + 1, uncovered & ~self.closed[i], chosen)
            chosen.pop()
            if found is not None:
                return found
            return rec(i + 1, uncovered, chosen)

        return rec(0, self.full, [])


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def is_cover(net: PowerNetwork, buses) -> bool:
    adj = net.adjacency()
    chosen = set(buses)
    return all(b in chosen or adj[b] & chosen for b in adj)


def place_pmus(net: PowerNetwork, node_cap: int | None = None, time_cap_s: float | None = None) -> Placement:
    """Minimum-cardinality observability cover; falls back to greedy when a limit is hit."""
    cover = _Cover(net, node_cap, time_cap_s)
    greedy = cover.greedy()
    try:
        best = cover.minimum(greedy)
        best = cover.lex_smallest(len(best))
    except _Budget:
        return Placement(tuple(cover.ids[i] for i in greedy), optimal=False, nodes=cover.nodes)
    return Placement(tuple(cover.ids[i] for i in best), optimal=True, nodes=cover.nodes)

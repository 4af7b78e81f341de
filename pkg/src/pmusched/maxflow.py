"""Shortest-augmenting-path max flow with path decomposition.

Capacities are non-negative integers or ``math.inf``.  Arc iteration follows
insertion order, so results are reproducible.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

_SUPER_SOURCE = "__super_source__"


class UnboundedFlow(ValueError):
    pass


@dataclass
class FlowNetwork:
    """Directed network; ``source_cap`` optionally limits the total outflow."""

    source: object
    sink: object
    arcs: dict = field(default_factory=dict)
    source_cap: float | None = None

    def add_arc(self, u, v, cap):
        if cap < 0:
            raise ValueError(f"negative capacity on arc {u}->{v}")
        if u != v:
            self.arcs[(u, v)] = self.arcs.get((u, v), 0) + cap


@dataclass
class FlowResult:
    value: float
    paths: list  # [(vertices source..sink, amount)]
    cut: set  # source side of a minimum cut
    flow: dict  # arc -> flow carried


def max_flow(net: FlowNetwork) -> FlowResult:
    cap = dict(net.arcs)
    source, sink = net.source, net.sink
    if net.source_cap is not None:
        cap[(_SUPER_SOURCE, source)] = net.source_cap
        source = _SUPER_SOURCE

    adj: dict = {}
    for u, v in cap:
        adj.setdefault(u, [])
        adj.setdefault(v, [])
        if v not in adj[u]:
            adj[u].append(v)
        if u not in adj[v]:
            adj[v].append(u)
    net_flow: dict = {}

    def residual(u, v):
        return cap.get((u, v), 0) - net_flow.get((u, v), 0)

    value = 0
    while source in adj and sink in adj and source != sink:
        parent = {source: None}
        queue = deque([source])
        while queue and sink not in parent:
            u = queue.popleft()
            for v in adj[u]:
                if v not in parent and residual(u, v) > 0:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            break
        path = [sink]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        path.reverse()
        amount = min(residual(u, v) for u, v in zip(path, path[1:]))
        if amount == math.inf:
            raise UnboundedFlow("source and sink joined by an infinite-capacity path")
        for u, v in zip(path, path[1:]):
            net_flow[(u, v)] = net_flow.get((u, v), 0) + amount
            net_flow[(v, u)] = net_flow.get((v, u), 0) - amount
        value += amount

    flow = {(u, v): f for (u, v), f in net_flow.items() if f > 0}

    cut = {source}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in cut and residual(u, v) > 0:
                cut.add(v)
                queue.append(v)

    paths = _decompose(flow, source, sink, adj)
    if net.source_cap is not None:
        paths = [(p[1:], f) for p, f in paths]
        cut.discard(_SUPER_SOURCE)
        flow.pop((_SUPER_SOURCE, net.source), None)
    return FlowResult(value, paths, cut, flow)


def _decompose(flow: dict, source, sink, adj: dict) -> list:
    flow = dict(flow)
    paths = []
    while True:
        path = [source]
        seen = {source: 0}
        while path[-1] != sink:
            u = path[-1]
            nxt = next((v for v in adj.get(u, ()) if flow.get((u, v), 0) > 0), None)
            if nxt is None:
                return paths
            if nxt in seen:
                # circulation: cancel it and restart from the source
                loop = path[seen[nxt]:] + [nxt]
                amount = min(flow[(a, b)] for a, b in zip(loop, loop[1:]))
                for a, b in zip(loop, loop[1:]):
                    flow[(a, b)] -= amount
                path = [source]
                seen = {source: 0}
                continue
            seen[nxt] = len(path)
            path.append(nxt)
        amount = min(flow[(a, b)] for a, b in zip(path, path[1:]))
        for a, b in zip(path, path[1:]):
            flow[(a, b)] -= amount
        paths.append((path, amount))


def cut_capacity(net: FlowNetwork, cut: set) -> float:
    """Capacity of the cut whose source side is ``cut`` (source_cap arc included)."""
    total = 0
    if net.source_cap is not None and net.source not in cut:
        total += net.source_cap
    for (u, v), c in net.arcs.items():
        if u in cut and v not in cut:
            total += c
    return total

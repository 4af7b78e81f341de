"""Scheduling instances from a power network: PMU weights and transmission precedence."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from ..core import PROC_TIME_RANGE, Instance, make_instance
from .network import AdmittanceMatrix, PowerNetwork, build_admittance
from .placement import Placement, place_pmus
from .svd import SvdResult, svd


@dataclass(frozen=True)
class PmuSubmatrix:
    bus_ids: tuple[int, ...]  # row/column i belongs to bus_ids[i]
    entries: np.ndarray


def pmu_submatrix(Y: AdmittanceMatrix, placement: Placement) -> PmuSubmatrix:
    buses = tuple(sorted(placement.pmu_buses))
    idx = [Y.index(b) for b in buses]
    return PmuSubmatrix(buses, Y.entries[np.ix_(idx, idx)].copy())


def derive_weights(result: SvdResult, n: int) -> list[int]:
    """Weight of rank k is ceil(||sigma_k u_k|| / n)."""
    return [math.ceil(float(np.linalg.norm(s * result.left[:, k])) / n)
            for k, s in enumerate(result.singular_values)]


def derive_precedence(result: SvdResult, bus_ids) -> list[int]:
    """Rank PMUs by walking sigma_k u_k in descending sigma order.

    Vector k ranks the bus of its largest-magnitude entry not already ranked
    (ties go to the smaller bus id).  Returns bus ids, highest precedence first.
    """
    ranked: list[int] = []
    taken: set[int] = set()
    for k, s in enumerate(result.singular_values):
        mags = np.abs(s * result.left[:, k])
        for i in sorted(range(len(bus_ids)), key=lambda i: (-mags[i], bus_ids[i])):
            if bus_ids[i] not in taken:
                ranked.append(bus_ids[i])
                taken.add(bus_ids[i])
                break
    return ranked


def chain_edges(ranked) -> list[tuple[int, int]]:
    return list(zip(ranked, ranked[1:]))


@dataclass(frozen=True)
class Derivation:
    placement: Placement
    submatrix: PmuSubmatrix
    svd: SvdResult
    ranked: list  # bus ids, transmitted first to last
    weights: dict  # bus id -> weight
    instance: Instance


def derive(net: PowerNetwork, seed: int, placement: Placement | None = None, **limits) -> Derivation:
    placement = placement or place_pmus(net, **limits)
    sub = pmu_submatrix(build_admittance(net), placement)
    result = svd(sub.entries)
    n = len(sub.bus_ids)
    ranked = derive_precedence(result, sub.bus_ids)
    rank_weight = derive_weights(result, n)
    weights = {bus: rank_weight[k] for k, bus in enumerate(ranked)}

    rng = random.Random(seed)
    lo, hi = PROC_TIME_RANGE
    p = [rng.randint(lo, hi) for _ in sub.bus_ids]
    job = {bus: j for j, bus in enumerate(sub.bus_ids)}
    inst = make_instance(p, [weights[b] for b in sub.bus_ids],
                         [(job[a], job[b]) for a, b in chain_edges(ranked)],
                         [str(b) for b in sub.bus_ids])
    return Derivation(placement, sub, result, ranked, weights, inst)


def derive_instance(net: PowerNetwork, seed: int, placement: Placement | None = None, **limits) -> Instance:
    return derive(net, seed, placement, **limits).instance

"""Case-file ingestion and bus admittance matrix construction."""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np


class CaseError(ValueError):
    pass


class MalformedCase(CaseError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DanglingBranch(CaseError):
    pass


class ZeroImpedanceBranch(CaseError):
    pass


@dataclass(frozen=True)
class Bus:
    id: int
    gs: float = 0.0  # MW demanded at 1 p.u. voltage
    bs: float = 0.0  # MVAr injected at 1 p.u. voltage


@dataclass(frozen=True)
class Branch:
    f: int
    t: int
    r: float
    x: float
    b: float = 0.0
    tap: float = 0.0
    shift: float = 0.0  # degrees
    status: int = 1


@dataclass(frozen=True)
class PowerNetwork:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float = 100.0
    name: str = ""

    @property
    def bus_ids(self) -> list[int]:
        return sorted(b.id for b in self.buses)

    def adjacency(self) -> dict[int, set[int]]:
        """Neighbour sets over in-service branches."""
        adj = {b.id: set() for b in self.buses}
        for br in self.branches:
            if br.status and br.f != br.t:
                adj[br.f].add(br.t)
                adj[br.t].add(br.f)
        return adj


_BLOCK = re.compile(r"mpc\.(\w+)\s*=\s*\[")
_SCALAR = re.compile(r"mpc\.(\w+)\s*=\s*([-+0-9.eE]+)\s*;")
_FUNC = re.compile(r"function\s+\w+\s*=\s*(\w+)")


def _matrix_rows(lines: list[str], start: int, first: str) -> tuple[list[tuple[int, list[float]]], int]:
    rows = []
    buf = first
    k = start
    while True:
        text = buf.split("%", 1)[0]
        end = "]" in text
        text = text.split("]", 1)[0]
        for chunk in text.split(";"):
            toks = chunk.replace(",", " ").split()
            if toks:
                try:
                    rows.append((k + 1, [float(t) for t in toks]))
                except ValueError:
                    raise MalformedCase(f"non-numeric entry in {chunk.strip()!r}", k + 1) from None
        if end:
            return rows, k
        k += 1
        if k >= len(lines):
            raise MalformedCase("unterminated matrix block", start + 1)
        buf = lines[k]


def parse_case(text: str, name: str = "") -> PowerNetwork:
    lines = text.splitlines()
    blocks: dict[str, list] = {}
    base_mva = None
    k = 0
    while k < len(lines):
        line = lines[k].split("%", 1)[0]
        if (m := _FUNC.search(line)) and not name:
            name = m.group(1)
        if m := _SCALAR.search(line):
            if m.group(1) == "baseMVA":
                base_mva = float(m.group(2))
        elif m := _BLOCK.search(line):
            rows, k = _matrix_rows(lines, k, line[m.end():])
            blocks[m.group(1)] = rows
        k += 1

    if base_mva is None:
        raise MalformedCase("missing mpc.baseMVA")
    for key in ("bus", "branch"):
        if key not in blocks:
            raise MalformedCase(f"missing mpc.{key} block")

    buses = []
    for line_no, row in blocks["bus"]:
        if len(row) < 6:
            raise MalformedCase(f"bus row has {len(row)} columns, need at least 6", line_no)
        buses.append(Bus(int(row[0]), row[4], row[5]))
    ids = {b.id for b in buses}
    if len(ids) != len(buses):
        raise MalformedCase("duplicate bus ids")

    branches = []
    for line_no, row in blocks["branch"]:
        if len(row) < 11:
            raise MalformedCase(f"branch row has {len(row)} columns, need at least 11", line_no)
        br = Branch(int(row[0]), int(row[1]), row[2], row[3], row[4], row[8], row[9], int(row[10]))
        for end in (br.f, br.t):
            if end not in ids:
                raise DanglingBranch(f"line {line_no}: branch {br.f}-{br.t} references missing bus {end}")
        branches.append(br)
    return PowerNetwork(tuple(buses), tuple(branches), base_mva, name)


def load_case(path_or_name: str | Path) -> PowerNetwork:
    """Read a case file, or one of the bundled IEEE cases by name (e.g. ``case14``)."""
    p = Path(path_or_name)
    if p.exists():
        return parse_case(p.read_text(), p.stem)
    name = str(path_or_name)
    res = resources.files("pmusched.cases").joinpath(f"{name}.m")
    if not res.is_file():
        raise FileNotFoundError(path_or_name)
    return parse_case(res.read_text(), name)


BUNDLED_CASES = ("case14", "case30", "case39", "case57", "case118", "case300")


@dataclass(frozen=True)
class AdmittanceMatrix:
    bus_ids: tuple[int, ...]
    entries: np.ndarray  # complex, per unit

    def index(self, bus: int) -> int:
        return self.bus_ids.index(bus)


def build_admittance(net: PowerNetwork) -> AdmittanceMatrix:
    """Pi-model nodal admittance with off-nominal taps and phase shifters."""
    ids = tuple(net.bus_ids)
    idx = {b: i for i, b in enumerate(ids)}
    Y = np.zeros((len(ids), len(ids)), dtype=complex)
    for br in net.branches:
        if not br.status:
            continue
        if br.r == 0 and br.x == 0:
            raise ZeroImpedanceBranch(f"branch {br.f}-{br.t} has zero impedance")
        y = 1 / complex(br.r, br.x)
        tau = br.tap or 1.0
        tap = tau * cmath.exp(1j * math.radians(br.shift))
        f, t = idx[br.f], idx[br.t]
        Y[f, f] += (y + 1j * br.b / 2) / tau**2
        Y[t, t] += y + 1j * br.b / 2
        Y[f, t] -= y / tap.conjugate()
        Y[t, f] -= y / tap
    for bus in net.buses:
        i = idx[bus.id]
        Y[i, i] += complex(bus.gs, bus.bs) / net.base_mva
    Y.setflags(write=False)
    return AdmittanceMatrix(ids, Y)

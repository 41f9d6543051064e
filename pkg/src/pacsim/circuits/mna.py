"""Modified nodal analysis for linear resistive networks.

Supports resistors, ideal independent voltage sources and voltage-controlled
voltage sources (used for the ideal amplifiers between composer stages).
This solver knows nothing about composers; it is the independent check on
every closed-form readout equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, TopologyError


@dataclass
class ResistiveNetwork:
    ground: str = "0"
    resistors: list = field(default_factory=list)   # (a, b, ohms)
    sources: list = field(default_factory=list)     # (pos, neg, volts)
    vcvs: list = field(default_factory=list)        # (pos, neg, ctl_pos, ctl_neg, gain)

    def add_resistor(self, a: str, b: str, resistance: float) -> "ResistiveNetwork":
        if not resistance > 0:
            raise DomainError(f"resistance must be positive, got {resistance}")
        self.resistors.append((a, b, float(resistance)))
        return self

    def add_source(self, pos: str, neg: str, volts: float) -> "ResistiveNetwork":
        self.sources.append((pos, neg, float(volts)))
        return self

    def add_vcvs(self, pos: str, neg: str, ctl_pos: str, ctl_neg: str, gain: float) -> "ResistiveNetwork":
        self.vcvs.append((pos, neg, ctl_pos, ctl_neg, float(gain)))
        return self

    def nodes(self) -> list[str]:
        seen = {self.ground: None}
        for a, b, _ in self.resistors:
            seen.setdefault(a)
            seen.setdefault(b)
        for p, q, _ in self.sources:
            seen.setdefault(p)
            seen.setdefault(q)
        for p, q, cp, cq, _ in self.vcvs:
            for x in (p, q, cp, cq):
                seen.setdefault(x)
        return list(seen)

    def _check_connected(self, nodes):
        parent = {x: x for x in nodes}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        edges = [(a, b) for a, b, _ in self.resistors]
        edges += [(p, q) for p, q, _ in self.sources]
        edges += [(p, q) for p, q, *_ in self.vcvs]
        for a, b in edges:
            parent[find(a)] = find(b)
        root = find(self.ground)
        stray = [x for x in nodes if find(x) != root]
        if stray:
            raise TopologyError(f"nodes not connected to ground: {stray}")


@dataclass(frozen=True)
class Solution:
    voltages: dict
    source_currents: tuple  # current out of each independent source's + terminal
    residual: float

    def __getitem__(self, node):
        return self.voltages[node]

    def branch_current(self, a: str, b: str, resistance: float) -> float:
        """Current flowing a -> b through a resistor of the given value."""
        return (self.voltages[a] - self.voltages[b]) / resistance


def mna_solve(net: ResistiveNetwork, tol: float = 1e-12) -> Solution:
    """Node voltages of ``net`` with KCL holding to relative ``tol``."""
    nodes = net.nodes()
    net._check_connected(nodes)
    index = {x: i - 1 for i, x in enumerate(nodes)}  # ground -> -1
    nv = len(nodes) - 1
    nsrc = len(net.sources) + len(net.vcvs)
    size = nv + nsrc
    A = np.zeros((size, size))
    z = np.zeros(size)

    def stamp(r, c, val):
        if r >= 0 and c >= 0:
            A[r, c] += val

    for a, b, res in net.resistors:
        g = 1.0 / res
        ia, ib = index[a], index[b]
        stamp(ia, ia, g)
        stamp(ib, ib, g)
        stamp(ia, ib, -g)
        stamp(ib, ia, -g)

    row = nv
    for p, q, volts in net.sources:
        ip, iq = index[p], index[q]
        stamp(ip, row, 1.0)
        stamp(iq, row, -1.0)
        stamp(row, ip, 1.0)
        stamp(row, iq, -1.0)
        z[row] = volts
        row += 1
    for p, q, cp, cq, gain in net.vcvs:
        ip, iq, icp, icq = index[p], index[q], index[cp], index[cq]
        stamp(ip, row, 1.0)
        stamp(iq, row, -1.0)
        stamp(row, ip, 1.0)
        stamp(row, iq, -1.0)
        stamp(row, icp, -gain)
        stamp(row, icq, gain)
        row += 1

    if size == 0:
        return Solution({net.ground: 0.0}, (), 0.0)
    try:
        x = np.linalg.solve(A, z)
    except np.linalg.LinAlgError:
        raise TopologyError("nodal system is singular") from None
    if not np.all(np.isfinite(x)):
        raise TopologyError("nodal system is singular")
    # one step of iterative refinement keeps the KCL residual at rounding level
    x = x + np.linalg.solve(A, z - A @ x)

    voltages = {net.ground: 0.0}
    for node, i in index.items():
        if i >= 0:
            voltages[node] = float(x[i])
    residual = _kcl_residual(net, voltages, x[nv:], index)
    if residual > tol:
        raise TopologyError(f"nodal system ill-conditioned (KCL residual {residual:.3g})")
    currents = tuple(float(-c) for c in x[nv:nv + len(net.sources)])
    return Solution(voltages, currents, residual)


def _kcl_residual(net, voltages, src_currents, index) -> float:
    """Worst relative current imbalance over non-ground nodes."""
    net_in = {x: 0.0 for x in index}
    scale = {x: 0.0 for x in index}
    for a, b, res in net.resistors:
        i = (voltages[a] - voltages[b]) / res
        net_in[a] -= i
        net_in[b] += i
        scale[a] += abs(i)
        scale[b] += abs(i)
    branches = [(p, q) for p, q, _ in net.sources] + [(p, q) for p, q, *_ in net.vcvs]
    for (p, q), i in zip(branches, src_currents):
        net_in[p] -= i
        net_in[q] += i
        scale[p] += abs(i)
        scale[q] += abs(i)
    worst = 0.0
    # nodes where every current cancels to rounding residue are judged
    # against the network's largest current instead of their own
    floor = 1e-6 * max(scale.values(), default=0.0)
    for node in index:
        if node == net.ground:
            continue
        denom = max(scale[node], floor)
        if denom > 0:
            worst = max(worst, abs(net_in[node]) / denom)
    return worst

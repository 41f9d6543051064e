"""Polytree Bayesian networks and the ``.bn`` text format.

A record per node::

    node A states=4 prior=0.25,0.25,0.25,0.25
    node X states=4 parents=A cpt=0.7,0.1,0.1,0.1;0.1,0.7,0.1,0.1;...

CPT rows are listed for parent-state combinations in row-major order, the
first listed parent varying slowest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import ParseError, StructureError

ROW_TOL = 1e-12


@dataclass
class BayesNode:
    id: str
    states: int
    parents: tuple[str, ...] = ()
    cpt: np.ndarray = field(default=None, repr=False)  # shape (*parent_states, states)
    state_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.states < 2:
            raise StructureError(f"node {self.id}: needs at least two states")
        self.parents = tuple(self.parents)
        if self.cpt is None:
            raise StructureError(f"node {self.id}: missing prior/CPT")
        self.cpt = np.asarray(self.cpt, dtype=float)
        if self.cpt.shape[-1] != self.states:
            raise StructureError(f"node {self.id}: CPT rows must have {self.states} entries")
        if self.cpt.ndim != len(self.parents) + 1:
            raise StructureError(f"node {self.id}: CPT rank does not match {len(self.parents)} parents")
        if np.any(self.cpt < 0):
            raise StructureError(f"node {self.id}: negative probability")
        rows = self.cpt.reshape(-1, self.states)
        for row in rows:
            if abs(math.fsum(row) - 1.0) > ROW_TOL:
                raise StructureError(f"node {self.id}: CPT row {row.tolist()} does not sum to 1")

    @property
    def is_root(self) -> bool:
        return not self.parents


class BayesNet:
    """Directed acyclic network whose skeleton has no undirected cycle."""

    def __init__(self, nodes: Iterable[BayesNode] = ()):
        self.nodes: dict[str, BayesNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise StructureError(f"duplicate node {node.id}")
            self.nodes[node.id] = node
        self._validate()

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes.values())

    def __getitem__(self, node_id) -> BayesNode:
        return self.nodes[node_id]

    def children(self, node_id) -> list[str]:
        return [n.id for n in self if node_id in n.parents]

    def neighbours(self, node_id) -> list[str]:
        return list(self.nodes[node_id].parents) + self.children(node_id)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(p, n.id) for n in self for p in n.parents]

    def _validate(self):
        for node in self:
            for p in node.parents:
                if p not in self.nodes:
                    raise StructureError(f"node {node.id}: unknown parent {p}")
                if p == node.id:
                    raise StructureError(f"node {node.id} is its own parent")
                expected = self.nodes[p].states
                axis = node.parents.index(p)
                if node.cpt.shape[axis] != expected:
                    raise StructureError(f"node {node.id}: CPT axis for {p} has "
                                         f"{node.cpt.shape[axis]} entries, expected {expected}")
            if len(set(node.parents)) != len(node.parents):
                raise StructureError(f"node {node.id}: repeated parent")
        # skeleton must be a forest; any orientation of a forest is acyclic
        parent = {x: x for x in self.nodes}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra == rb:
                raise StructureError(f"edge {a}->{b} closes an undirected cycle; "
                                     "only polytrees are supported")
            parent[ra] = rb

    def topological_order(self) -> list[str]:
        order, seen = [], set()

        def visit(x):
            if x in seen:
                return
            seen.add(x)
            for p in self.nodes[x].parents:
                visit(p)
            order.append(x)

        for x in self.nodes:
            visit(x)
        return order

    def joint_size(self) -> int:
        return math.prod(n.states for n in self)


# -- text format ---------------------------------------------------------------

def _floats(text, line):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ParseError(f"bad number list {text!r}", line) from None


def parse_bn(text: str) -> BayesNet:
    records = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "node" or len(parts) < 3:
            raise ParseError(f"expected 'node <id> key=value ...', got {line!r}", lineno)
        fields = {}
        for item in parts[2:]:
            key, sep, value = item.partition("=")
            if not sep:
                raise ParseError(f"expected key=value, got {item!r}", lineno)
            fields[key] = value
        records.append((lineno, parts[1], fields))

    states = {}
    for lineno, nid, f in records:
        if "states" not in f:
            raise ParseError(f"node {nid}: missing states=", lineno)
        try:
            states[nid] = int(f["states"])
        except ValueError:
            raise ParseError(f"node {nid}: states must be an integer", lineno) from None

    nodes = []
    for lineno, nid, f in records:
        s = states[nid]
        parents = tuple(p for p in f.get("parents", "").split(",") if p)
        names = tuple(f["names"].split(",")) if "names" in f else None
        if names is not None and len(names) != s:
            raise ParseError(f"node {nid}: {len(names)} names for {s} states", lineno)
        if parents:
            if "cpt" not in f:
                raise ParseError(f"node {nid}: nodes with parents need cpt=", lineno)
            missing = [p for p in parents if p not in states]
            if missing:
                raise ParseError(f"node {nid}: unknown parent(s) {missing}", lineno)
            rows = [_floats(r, lineno) for r in f["cpt"].split(";") if r.strip()]
            shape = tuple(states[p] for p in parents)
            if len(rows) != math.prod(shape) or any(len(r) != s for r in rows):
                raise ParseError(f"node {nid}: cpt needs {math.prod(shape)} rows of {s} values", lineno)
            cpt = np.array(rows).reshape(shape + (s,))
        else:
            if "prior" not in f:
                raise ParseError(f"node {nid}: root nodes need prior=", lineno)
            cpt = np.array(_floats(f["prior"], lineno))
            if cpt.shape != (s,):
                raise ParseError(f"node {nid}: prior needs {s} values", lineno)
        try:
            nodes.append(BayesNode(nid, s, parents, cpt, names))
        except StructureError as exc:
            raise ParseError(str(exc), lineno) from None
    return BayesNet(nodes)


def load_bn(path) -> BayesNet:
    return parse_bn(Path(path).read_text())


def format_bn(net: BayesNet) -> str:
    lines = []
    for node in net:
        head = f"node {node.id} states={node.states}"
        if node.state_names:
            head += " names=" + ",".join(node.state_names)
        if node.is_root:
            lines.append(head + " prior=" + ",".join(repr(float(x)) for x in node.cpt))
        else:
            rows = node.cpt.reshape(-1, node.states)
            cpt = ";".join(",".join(repr(float(x)) for x in r) for r in rows)
            lines.append(head + f" parents={','.join(node.parents)} cpt={cpt}")
    return "\n".join(lines) + "\n"


# -- generators ----------------------------------------------------------------

def random_cpt(rng, parent_states, states, concentration=1.0):
    shape = tuple(parent_states) + (states,)
    rows = rng.dirichlet([concentration] * states, size=math.prod(parent_states) if parent_states else 1)
    return rows.reshape(shape)


def random_polytree(rng, n_nodes: int, max_states: int = 4, min_states: int = 2) -> BayesNet:
    """Random tree skeleton with random edge orientations and Dirichlet CPTs."""
    ids = [f"N{i}" for i in range(n_nodes)]
    states = {x: int(rng.integers(min_states, max_states + 1)) for x in ids}
    parents = {x: [] for x in ids}
    for i in range(1, n_nodes):
        j = int(rng.integers(0, i))
        a, b = ids[i], ids[j]
        if rng.random() < 0.5:
            parents[a].append(b)
        else:
            parents[b].append(a)
    nodes = []
    for x in ids:
        ps = tuple(parents[x])
        cpt = random_cpt(rng, [states[p] for p in ps], states[x])
        if not ps:
            cpt = cpt.reshape(states[x])
        nodes.append(BayesNode(x, states[x], ps, cpt))
    return BayesNet(nodes)


def fork_polytree(rng=None, states: int = 4, cpts=None) -> BayesNet:
    """Parent A, node X, children Y and Z; all nodes share ``states``."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    uniform = np.full(states, 1.0 / states)
    if cpts is None:
        cpts = {
            "A": random_cpt(rng, [], states).reshape(states),
            "X": random_cpt(rng, [states], states),
            "Y": random_cpt(rng, [states], states),
            "Z": random_cpt(rng, [states], states),
        }
    return BayesNet([
        BayesNode("A", states, (), cpts.get("A", uniform)),
        BayesNode("X", states, ("A",), cpts["X"]),
        BayesNode("Y", states, ("X",), cpts["Y"]),
        BayesNode("Z", states, ("X",), cpts["Z"]),
    ])

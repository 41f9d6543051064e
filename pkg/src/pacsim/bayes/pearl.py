"""Pearl belief propagation on polytrees with pluggable arithmetic.

The message schedule and the software normalizations are shared; only the
products and sums-of-products are delegated to an arithmetic backend. The
exact backend uses floating point; the composer backend routes every
product through multiplication composers and every sum-of-products through
add-multiply composers, re-quantizing each message to n digits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..encoding import ProbabilityVector, encode
from ..errors import InconsistentEvidenceError, SchedulingError, StructureError
from ..framework import MUL, SOP, CircuitConfig, Leaf, compile_expr, evaluate_tree
from .network import BayesNet, BayesNode


# -- arithmetic backends ---------------------------------------------------------

class ExactArithmetic:
    name = "exact"

    def hadamard(self, vectors):
        out = np.ones_like(np.asarray(vectors[0], dtype=float))
        for v in vectors:
            out = out * np.asarray(v, dtype=float)
        return out

    def prior(self, node: BayesNode, parent_msgs):
        if node.is_root:
            return node.cpt.copy()
        return _contract(node.cpt, parent_msgs)

    def lambda_to_parent(self, node: BayesNode, lam, parent_msgs, index):
        return _contract_lambda(node.cpt, lam, parent_msgs, index)


def _contract(cpt, parent_msgs):
    out = cpt
    for msg in parent_msgs:
        out = np.tensordot(np.asarray(msg, dtype=float), out, axes=([0], [0]))
    return out


def _contract_lambda(cpt, lam, parent_msgs, index):
    t = np.tensordot(cpt, np.asarray(lam, dtype=float), axes=([cpt.ndim - 1], [0]))
    # t has one axis per parent; fold every parent except ``index``
    for axis in reversed(range(len(parent_msgs))):
        if axis == index:
            continue
        t = np.tensordot(t, np.asarray(parent_msgs[axis], dtype=float), axes=([axis], [0]))
    return t


# Belief propagation multiplies many small numbers; the linear operand readout
# keeps the product error shrinking with n, unlike the unloaded voltage
# readout whose ladders have an error floor.
BP_CONFIG = CircuitConfig(first_stage="current")


class ComposerArithmetic:
    """Products and sums-of-products evaluated on composer circuits.

    ``stored`` maps node id to an object array (CPT-shaped) of the
    probability vectors programmed into the CPT composers; by default each
    entry is the nearest representable vector to the CPT value.
    """

    name = "composer"

    def __init__(self, config: CircuitConfig = BP_CONFIG, stored=None):
        self.config = config
        self.stored = dict(stored or {})
        self._trees = {}

    def stored_cpt(self, node: BayesNode):
        table = self.stored.get(node.id)
        if table is None:
            table = store_cpt(node.cpt, self.config)
            self.stored[node.id] = table
        return table

    def _tree(self, key, build):
        tree = self._trees.get(key)
        if tree is None:
            tree = compile_expr(build(), self.config)
            self._trees[key] = tree
        return tree

    def _eval(self, tree, bindings) -> float:
        return evaluate_tree(tree, bindings).value

    def hadamard(self, vectors):
        vectors = [_max_normalize(v) for v in vectors]
        if len(vectors) == 1:
            return vectors[0]
        r = len(vectors)
        tree = self._tree(("mul", r), lambda: product_expr(r))
        out = np.empty(len(vectors[0]))
        for j in range(len(out)):
            out[j] = self._eval(tree, {f"v{i}": _unit(v[j]) for i, v in enumerate(vectors)})
        return out

    def prior(self, node: BayesNode, parent_msgs):
        table = self.stored_cpt(node)
        if node.is_root:
            return np.array([v.value for v in table])
        msgs = [_sum_normalize(m) for m in parent_msgs]
        shape = node.cpt.shape[:-1]
        combos = list(itertools.product(*[range(s) for s in shape]))
        tree = self._tree(("prior", shape), lambda: prior_expr(shape))
        bindings = {f"m{i}_{ui}": _unit(m[ui]) for i, m in enumerate(msgs) for ui in range(len(m))}
        out = np.empty(node.states)
        for x in range(node.states):
            for u in combos:
                bindings[f"c{_flat(u, shape)}"] = table[u + (x,)]
            out[x] = self._eval(tree, bindings)
        return out

    def lambda_to_parent(self, node: BayesNode, lam, parent_msgs, index):
        table = self.stored_cpt(node)
        lam = _max_normalize(lam)
        msgs = [_sum_normalize(m) for m in parent_msgs]
        shape = node.cpt.shape[:-1]
        others = [i for i in range(len(shape)) if i != index]
        other_combos = list(itertools.product(*[range(shape[i]) for i in others]))
        s = node.states
        tree = self._tree(("lambda", shape, index, s), lambda: lambda_expr(shape, index, s))
        bindings = {f"l{x}": _unit(lam[x]) for x in range(s)}
        for i in others:
            for wi in range(shape[i]):
                bindings[f"m{i}_{wi}"] = _unit(msgs[i][wi])
        out = np.empty(shape[index])
        for ui in range(shape[index]):
            for x in range(s):
                for w in other_combos:
                    u = [0] * len(shape)
                    u[index] = ui
                    for i, wi in zip(others, w):
                        u[i] = wi
                    bindings[f"c{x}_{_flat(w, [shape[i] for i in others])}"] = table[tuple(u) + (x,)]
            out[ui] = self._eval(tree, bindings)
        return out


# -- expressions shared with the netlist compiler --------------------------------
#
# Leaf names: v<i> product factors; m<i>_<u> parent message i at state u;
# l<x> the node's likelihood at state x; c<...> a stored CPT entry.

def product_expr(r: int):
    return MUL(*[Leaf(f"v{i}") for i in range(r)])


def prior_expr(shape):
    """Sum over joint parent states of message products times a CPT entry."""
    terms = []
    for u in itertools.product(*[range(s) for s in shape]):
        factors = [Leaf(f"m{i}_{ui}") for i, ui in enumerate(u)]
        terms.append(MUL(*factors, Leaf(f"c{_flat(u, shape)}")))
    return SOP(*terms, divisor=1)


def lambda_expr(shape, index: int, states: int):
    """Likelihood message to parent ``index`` for one of its states."""
    others = [i for i in range(len(shape)) if i != index]
    other_shape = [shape[i] for i in others]
    terms = []
    for x in range(states):
        for w in itertools.product(*[range(d) for d in other_shape]):
            factors = [Leaf(f"l{x}")] + [Leaf(f"m{i}_{wi}") for i, wi in zip(others, w)]
            terms.append(MUL(*factors, Leaf(f"c{x}_{_flat(w, other_shape)}")))
    return SOP(*terms, divisor=1)


def store_cpt(cpt, config: CircuitConfig):
    """Object array of probability vectors programmed for each CPT entry."""
    cpt = np.asarray(cpt, dtype=float)
    table = np.empty(cpt.shape, dtype=object)
    for idx in np.ndindex(cpt.shape):
        table[idx] = encode(_unit(cpt[idx]), config.n, config.k)
    return table


def _flat(u, shape) -> int:
    return int(np.ravel_multi_index(tuple(u), tuple(shape))) if len(shape) else 0


def _unit(x) -> float:
    return min(max(float(x), 0.0), 1.0)


def _max_normalize(v):
    v = np.asarray(v, dtype=float)
    m = v.max() if v.size else 0.0
    return v / m if m > 0 else v.copy()


def _sum_normalize(v):
    v = np.asarray(v, dtype=float)
    s = v.sum()
    return v / s if s > 0 else v.copy()


# -- message operations ----------------------------------------------------------

def likelihood(states: int, child_msgs, evidence: int | None = None, arith=None):
    """Element-wise product of child likelihood messages.

    An observed node's likelihood is its evidence indicator; child messages
    would only rescale it.
    """
    arith = arith or ExactArithmetic()
    if any(m is None for m in child_msgs):
        raise SchedulingError("missing child message")
    if evidence is not None:
        indicator = np.zeros(states)
        indicator[evidence] = 1.0
        return indicator
    vectors = [np.asarray(m, dtype=float) for m in child_msgs]
    if not vectors:
        return np.ones(states)
    if len(vectors) == 1:
        return vectors[0].copy()
    return arith.hadamard(vectors)


def prior(node: BayesNode, parent_msgs=(), arith=None):
    """Predictive support: parent messages contracted with the CPT."""
    arith = arith or ExactArithmetic()
    if not node.is_root and (len(parent_msgs) != len(node.parents) or any(m is None for m in parent_msgs)):
        raise SchedulingError(f"node {node.id}: missing parent message")
    return np.asarray(arith.prior(node, list(parent_msgs)), dtype=float)


def belief(pi, lam, arith=None):
    """Normalized element-wise product of prior and likelihood."""
    arith = arith or ExactArithmetic()
    prod = np.asarray(arith.hadamard([pi, lam]), dtype=float)
    total = prod.sum()
    if not total > 0:
        raise InconsistentEvidenceError("belief vanishes: evidence is contradictory")
    return prod / total


def lambda_to_parent(node: BayesNode, lam, parent_msgs, index: int, arith=None):
    """Diagnostic support sent to parent ``index`` (not normalized)."""
    arith = arith or ExactArithmetic()
    return np.asarray(arith.lambda_to_parent(node, lam, list(parent_msgs), index), dtype=float)


def pi_to_child(pi, other_lambdas, evidence: int | None = None, arith=None):
    """Causal support to one child: prior times the other children's lambdas.

    An observed node sends its evidence indicator; the other factors would
    only rescale it.
    """
    arith = arith or ExactArithmetic()
    vectors = [np.asarray(pi, dtype=float)] + [np.asarray(m, dtype=float) for m in other_lambdas]
    if evidence is not None:
        indicator = np.zeros(len(vectors[0]))
        indicator[evidence] = 1.0
        return indicator
    out = vectors[0] if len(vectors) == 1 else arith.hadamard(vectors)
    total = float(np.sum(out))
    if not total > 0:
        raise InconsistentEvidenceError("causal message vanishes: evidence is contradictory")
    return np.asarray(out, dtype=float) / total


# -- inference -------------------------------------------------------------------

@dataclass
class BPResult:
    beliefs: dict
    lam: dict
    pi: dict
    messages: dict = field(repr=False)
    backend: str = "exact"


def make_arithmetic(backend, config: CircuitConfig | None = None):
    if isinstance(backend, str):
        if backend == "exact":
            return ExactArithmetic()
        if backend == "composer":
            return ComposerArithmetic(config or BP_CONFIG)
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def _check_evidence(net: BayesNet, evidence):
    ev = {}
    for nid, state in (evidence or {}).items():
        if nid not in net.nodes:
            raise StructureError(f"evidence on unknown node {nid}")
        state = int(state)
        if not 0 <= state < net[nid].states:
            raise StructureError(f"evidence {nid}={state} outside 0..{net[nid].states - 1}")
        ev[nid] = state
    return ev


def bp_infer(net: BayesNet, evidence: Mapping[str, int] | None = None, backend="exact",
             config: CircuitConfig | None = None, order=None) -> BPResult:
    """Two-pass (collect, distribute) belief propagation.

    ``order`` optionally fixes the node visiting order (the first node of
    each component becomes its root); beliefs do not depend on it.
    """
    arith = make_arithmetic(backend, config)
    ev = _check_evidence(net, evidence)
    msgs: dict[tuple[str, str], np.ndarray] = {}
    children = {x: net.children(x) for x in net.nodes}

    def send(u, v):
        node = net[u]
        if v in node.parents:
            lam = likelihood(node.states, [msgs.get((c, u)) for c in children[u]], ev.get(u), arith)
            pmsgs = [msgs.get((p, u)) for p in node.parents]
            idx = node.parents.index(v)
            needed = [m for i, m in enumerate(pmsgs) if i != idx]
            if any(m is None for m in needed):
                raise SchedulingError(f"{u}->{v}: missing parent message")
            msgs[(u, v)] = lambda_to_parent(node, lam, pmsgs, idx, arith)
        else:
            pi = prior(node, [msgs.get((p, u)) for p in node.parents], arith)
            others = [msgs.get((c, u)) for c in children[u] if c != v]
            if any(m is None for m in others):
                raise SchedulingError(f"{u}->{v}: missing child message")
            msgs[(u, v)] = pi_to_child(pi, others, ev.get(u), arith)

    visit_order = list(order) if order is not None else list(net.nodes)
    seen = set()
    for root in visit_order:
        if root in seen:
            continue
        post, pre = [], []
        stack = [(root, None)]
        while stack:
            u, t = stack.pop()
            seen.add(u)
            pre.append((u, t))
            for w in net.neighbours(u):
                if w != t:
                    stack.append((w, u))
        post = list(reversed(pre))
        for u, t in post:
            if t is not None:
                send(u, t)
        for u, t in pre:
            for w in net.neighbours(u):
                if w != t:
                    send(u, w)

    beliefs, lams, pis = {}, {}, {}
    for x in net.nodes:
        node = net[x]
        lams[x] = likelihood(node.states, [msgs[(c, x)] for c in children[x]], ev.get(x), arith)
        pis[x] = prior(node, [msgs[(p, x)] for p in node.parents], arith)
        if x in ev and not isinstance(arith, ExactArithmetic):
            # the host knows the observation; a quantized prior may not
            # resolve its probability, so only exact arithmetic judges consistency
            beliefs[x] = lams[x].copy()
        else:
            beliefs[x] = belief(pis[x], lams[x], arith)
    return BPResult(beliefs, lams, pis, msgs, arith.name)


def linf_gap(a: Mapping[str, np.ndarray], b: Mapping[str, np.ndarray]) -> float:
    return max(float(np.max(np.abs(np.asarray(a[x]) - np.asarray(b[x])))) for x in a)

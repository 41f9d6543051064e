"""Netlists of composer instances and the compiler that produces them.

A netlist is a set of instances (``pc``, ``mul``, ``addmul``, ``decomp``)
and wires between their ports. The text form has one record per line::

    inst X_lik_j0_mul0 kind=mul n=10 k=2 src=X:lik terms=1 divisor=1
    inst X_prior_c3 kind=pc n=10 k=2 store=k2:1110000000 src=X:prior
    wire X_lik_j0_mul0.out X_lik_j0_mul0_d.in

Ports: ``pc`` has ``out``; ``mul`` has ``a``, ``b``, ``out``; ``addmul``
with m terms has ``a0``, ``b0`` .. ``a{m-1}``, ``b{m-1}``, ``out``;
``decomp`` has ``in`` and ``out``. Operand ports with no driver are primary
inputs and are bound by name (``inst.port``) at simulation time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .bayes.network import BayesNet
from .bayes.pearl import lambda_expr, prior_expr, product_expr, store_cpt
from .circuits.decomposer import decompose
from .encoding import ProbabilityVector, encode, parse_vector
from .errors import BuildError, EvaluationError, ParseError, TopologyError
from .framework import CircuitConfig, analog_output, build_tree, parse_expr, stage_ladder

KINDS = ("pc", "mul", "addmul", "decomp")
ROLES = ("lik", "prior", "lam", "pi", "bel")


@dataclass
class Instance:
    id: str
    kind: str
    n: int
    k: int = 2
    store: ProbabilityVector | None = None
    src: str = ""
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BuildError(f"instance {self.id}: unknown kind {self.kind!r}")
        if self.kind == "pc" and self.store is None:
            raise BuildError(f"instance {self.id}: pc needs a stored vector")
        if self.store is not None and (self.store.n != self.n or self.store.k != self.k):
            raise BuildError(f"instance {self.id}: stored vector does not match n={self.n}, k={self.k}")

    @property
    def terms(self) -> int:
        return int(self.attrs.get("terms", 1))

    @property
    def divisor(self) -> int:
        return int(self.attrs.get("divisor", 1))

    def input_ports(self) -> list[str]:
        if self.kind == "mul":
            return ["a", "b"]
        if self.kind == "addmul":
            return [f"{s}{i}" for i in range(self.terms) for s in "ab"]
        if self.kind == "decomp":
            return ["in"]
        return []


@dataclass
class ComposerNetlist:
    instances: dict = field(default_factory=dict)   # id -> Instance
    wires: list = field(default_factory=list)       # (src "id.out", dst "id.port")
    # compiler metadata, not part of the text form: signal -> input ports / output port
    input_signals: dict = field(default_factory=dict)
    output_signals: dict = field(default_factory=dict)

    def add(self, inst: Instance) -> Instance:
        if inst.id in self.instances:
            raise BuildError(f"duplicate instance {inst.id}")
        self.instances[inst.id] = inst
        return inst

    def connect(self, src: str, dst: str):
        self.wires.append((src, dst))

    def drivers(self) -> dict:
        return {dst: src for src, dst in self.wires}

    def inputs(self) -> list[str]:
        """Undriven operand ports, i.e. the primary inputs."""
        driven = self.drivers()
        return [f"{i.id}.{p}" for i in self.instances.values()
                for p in i.input_ports() if f"{i.id}.{p}" not in driven]

    def validate(self):
        seen = set()
        for src, dst in self.wires:
            sid, sport = _split_port(src)
            did, dport = _split_port(dst)
            for iid in (sid, did):
                if iid not in self.instances:
                    raise TopologyError(f"wire {src} -> {dst}: unknown instance {iid}")
            if sport != "out":
                raise TopologyError(f"wire source {src} is not an output port")
            a, b = self.instances[sid], self.instances[did]
            if dport not in b.input_ports():
                raise TopologyError(f"{did} ({b.kind}) has no input port {dport!r}")
            if dst in seen:
                raise TopologyError(f"port {dst} has more than one driver")
            seen.add(dst)
            if (a.n, a.k) != (b.n, b.k):
                raise TopologyError(f"wire {src} -> {dst} joins n={a.n},k={a.k} to n={b.n},k={b.k}")
        self.topological_order()

    def topological_order(self) -> list[str]:
        deps = {i: set() for i in self.instances}
        for src, dst in self.wires:
            deps[_split_port(dst)[0]].add(_split_port(src)[0])
        order, state = [], {}

        for start in self.instances:
            if start in state:
                continue
            stack = [(start, iter(sorted(deps[start])))]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    state[node] = 2
                    order.append(node)
                elif state.get(nxt) == 1:
                    raise TopologyError(f"netlist has a cycle through {nxt}")
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(sorted(deps[nxt]))))
        return order


def _split_port(ref: str) -> tuple[str, str]:
    iid, sep, port = ref.rpartition(".")
    if not sep or not iid or not port:
        raise TopologyError(f"malformed port reference {ref!r}")
    return iid, port


# -- text format -----------------------------------------------------------------

def format_netlist(nl: ComposerNetlist) -> str:
    lines = []
    for inst in nl.instances.values():
        parts = [f"inst {inst.id}", f"kind={inst.kind}", f"n={inst.n}", f"k={inst.k}"]
        if inst.store is not None:
            parts.append(f"store={inst.store}")
        if inst.src:
            parts.append(f"src={inst.src}")
        parts += [f"{key}={val}" for key, val in inst.attrs.items()]
        lines.append(" ".join(parts))
    lines += [f"wire {s} {d}" for s, d in nl.wires]
    return "\n".join(lines) + "\n"


def parse_netlist(text: str) -> ComposerNetlist:
    nl = ComposerNetlist()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "inst" and len(parts) >= 3:
                fields = {}
                for item in parts[2:]:
                    key, sep, value = item.partition("=")
                    if not sep:
                        raise ParseError(f"expected key=value, got {item!r}", lineno)
                    fields[key] = value
                for key in ("kind", "n"):
                    if key not in fields:
                        raise ParseError(f"instance {parts[1]}: missing {key}=", lineno)
                kind = fields.pop("kind")
                n = int(fields.pop("n"))
                k = int(fields.pop("k", 2))
                store = parse_vector(fields.pop("store")) if "store" in fields else None
                src = fields.pop("src", "")
                nl.add(Instance(parts[1], kind, n, k, store, src, fields))
            elif parts[0] == "wire" and len(parts) == 3:
                _split_port(parts[1])
                _split_port(parts[2])
                nl.connect(parts[1], parts[2])
            else:
                raise ParseError(f"expected 'inst ...' or 'wire <src.port> <dst.port>', got {line!r}", lineno)
        except ParseError:
            raise
        except (BuildError, TopologyError, ValueError) as exc:
            raise ParseError(str(exc), lineno) from None
    try:
        nl.validate()
    except TopologyError as exc:
        raise ParseError(str(exc)) from None
    return nl


def load_netlist(path) -> ComposerNetlist:
    return parse_netlist(Path(path).read_text())


# -- compiling expression trees --------------------------------------------------

class _Builder:
    """Turns composer trees into instances, deferring signal resolution."""

    def __init__(self, config: CircuitConfig, decomposers: bool):
        self.cfg = config
        self.decomposers = decomposers
        self.nl = ComposerNetlist()
        self.producers: dict[str, tuple] = {}   # signal -> ("port", ref) | ("alias", signal)
        self.pending: list[tuple[str, str]] = []  # (signal, dst port)

    def inst(self, iid, kind, src, store=None, **attrs):
        return self.nl.add(Instance(iid, kind, self.cfg.n, self.cfg.k, store, src,
                                    {k: str(v) for k, v in attrs.items()}))

    def lower_tree(self, tree, prefix: str, src: str, leaves: Mapping[str, object]) -> str:
        """Instances for one composer tree; returns the root output port.

        ``leaves`` maps each leaf name to a stored ``ProbabilityVector`` or
        to the name of a signal produced elsewhere (or left as an input).
        """
        outputs = {}

        def operand(node, dst):
            if node.kind != "pc":
                self.nl.connect(outputs[node.node_id], dst)
                return
            bound = leaves[node.leaf] if node.leaf is not None else node.const
            if isinstance(bound, str):
                self.pending.append((bound, dst))
                return
            vec = bound if isinstance(bound, ProbabilityVector) else encode(float(bound), self.cfg.n, self.cfg.k)
            pc = self.inst(f"{prefix}_{node.node_id}", "pc", src, store=vec)
            self.nl.connect(f"{pc.id}.out", dst)

        for node in tree.stages():
            iid = f"{prefix}_{node.node_id}"
            if node.kind == "mul":
                self.inst(iid, "mul", src, terms=1, divisor=1)
                for port, op in zip("ab", node.operands()):
                    operand(op, f"{iid}.{port}")
            elif node.kind == "addmul":
                self.inst(iid, "addmul", src, terms=len(node.children), divisor=node.divisor)
                for t, term in enumerate(node.children):
                    for port, op in zip("ab", term.children):
                        operand(op, f"{iid}.{port}{t}")
            elif node.kind == "pc":
                bound = leaves[node.leaf] if node.leaf is not None else node.const
                if isinstance(bound, str):
                    raise BuildError(f"lone leaf {node.leaf!r} needs a stored value")
                vec = bound if isinstance(bound, ProbabilityVector) else encode(float(bound), self.cfg.n, self.cfg.k)
                self.inst(iid, "pc", src, store=vec)
            else:
                raise BuildError(f"cannot lower {node.kind!r} stages; only products and sums of products")
            out = f"{iid}.out"
            if self.decomposers:
                d = self.inst(f"{iid}_d", "decomp", src)
                self.nl.connect(out, f"{d.id}.in")
                out = f"{d.id}.out"
            outputs[node.node_id] = out
        return outputs[tree.root.node_id]

    def produce(self, signal: str, port: str):
        self.producers[signal] = ("port", port)

    def alias(self, signal: str, other: str):
        self.producers[signal] = ("alias", other)

    def finish(self) -> ComposerNetlist:
        for signal, dst in self.pending:
            seen = set()
            while signal in self.producers and self.producers[signal][0] == "alias":
                if signal in seen:
                    raise BuildError(f"alias loop at {signal}")
                seen.add(signal)
                signal = self.producers[signal][1]
            if signal in self.producers:
                self.nl.connect(self.producers[signal][1], dst)
            else:
                self.nl.input_signals.setdefault(signal, []).append(dst)
        for signal, (how, ref) in self.producers.items():
            if how == "port":
                self.nl.output_signals[signal] = ref
        self.nl.validate()
        return self.nl


def lower_expr(expr, config: CircuitConfig = CircuitConfig(), decomposers: bool = True,
               constants: Mapping[str, object] | None = None) -> ComposerNetlist:
    """Netlist for one expression; leaves not in ``constants`` become inputs."""
    if isinstance(expr, str):
        expr = parse_expr(expr)
    tree = build_tree(expr)
    constants = constants or {}
    b = _Builder(config, decomposers)
    names = {n.leaf for n in tree.root.walk() if n.kind == "pc" and n.leaf is not None}
    b.lower_tree(tree, "e", "expr", {x: constants.get(x, x) for x in names})
    return b.finish()


def lower_bn(net: BayesNet, config: CircuitConfig = CircuitConfig(), roles: Iterable[str] = ROLES,
             nodes: Iterable[str] | None = None, decomposers: bool = True) -> ComposerNetlist:
    """Composer netlist for the belief-propagation datapath of ``net``.

    Per node and role: ``lik`` multiplies child likelihood messages,
    ``prior`` combines parent messages with the stored CPT, ``lam`` forms
    the message to each parent, ``pi`` the message to each child, and
    ``bel`` multiplies prior and likelihood. Normalization between modules
    is left to the host. Messages between modules are wired; anything not
    produced inside the netlist (evidence, messages from omitted nodes) is
    a primary input.
    """
    roles = set(roles)
    unknown = roles - set(ROLES)
    if unknown:
        raise BuildError(f"unknown roles {sorted(unknown)}")
    selected = list(net.nodes) if nodes is None else list(nodes)
    for x in selected:
        if x not in net.nodes:
            raise BuildError(f"unknown node {x}")
    b = _Builder(config, decomposers)
    trees = {}

    def tree_for(key, make):
        if key not in trees:
            trees[key] = build_tree(make())
        return trees[key]

    for x in selected:
        node = net[x]
        s = node.states
        kids = net.children(x)
        table = store_cpt(node.cpt, config)
        shape = node.cpt.shape[:-1]

        # likelihood: product of the children's messages
        for j in range(s):
            if len(kids) == 1:
                b.alias(f"lik:{x}[{j}]", f"lam:{kids[0]}->{x}[{j}]")
        if "lik" in roles and len(kids) >= 2:
            tree = tree_for(("mul", len(kids)), lambda: product_expr(len(kids)))
            for j in range(s):
                leaves = {f"v{i}": f"lam:{c}->{x}[{j}]" for i, c in enumerate(kids)}
                out = b.lower_tree(tree, f"{x}_lik_j{j}", f"{x}:lik", leaves)
                b.produce(f"lik:{x}[{j}]", out)

        # prior: stored directly at roots, sum of products otherwise
        if "prior" in roles:
            if node.is_root:
                for j in range(s):
                    pc = b.inst(f"{x}_prior_j{j}", "pc", f"{x}:prior", store=table[j])
                    b.produce(f"prior:{x}[{j}]", f"{pc.id}.out")
            else:
                tree = tree_for(("prior", shape), lambda: prior_expr(shape))
                for j in range(s):
                    leaves = {f"m{i}_{u}": f"pi:{p}->{x}[{u}]"
                              for i, p in enumerate(node.parents) for u in range(shape[i])}
                    for u in itertools.product(*[range(d) for d in shape]):
                        leaves[f"c{_flat(u, shape)}"] = table[u + (j,)]
                    out = b.lower_tree(tree, f"{x}_prior_j{j}", f"{x}:prior", leaves)
                    b.produce(f"prior:{x}[{j}]", out)

        # messages to parents
        if "lam" in roles:
            for idx, p in enumerate(node.parents):
                others = [i for i in range(len(shape)) if i != idx]
                other_shape = [shape[i] for i in others]
                tree = tree_for(("lam", shape, idx, s), lambda: lambda_expr(shape, idx, s))
                for ui in range(shape[idx]):
                    leaves = {f"l{xs}": f"lik:{x}[{xs}]" for xs in range(s)}
                    for i in others:
                        for wi in range(shape[i]):
                            leaves[f"m{i}_{wi}"] = f"pi:{node.parents[i]}->{x}[{wi}]"
                    for xs in range(s):
                        for w in itertools.product(*[range(d) for d in other_shape]):
                            u = [0] * len(shape)
                            u[idx] = ui
                            for i, wi in zip(others, w):
                                u[i] = wi
                            leaves[f"c{xs}_{_flat(w, other_shape)}"] = table[tuple(u) + (xs,)]
                    out = b.lower_tree(tree, f"{x}_lam_{p}_u{ui}", f"{x}:lam", leaves)
                    b.produce(f"lam:{x}->{p}[{ui}]", out)

        # messages to children
        for c in kids:
            others = [o for o in kids if o != c]
            if not others:
                for j in range(s):
                    b.alias(f"pi:{x}->{c}[{j}]", f"prior:{x}[{j}]")
                continue
            if "pi" not in roles:
                continue
            tree = tree_for(("mul", 1 + len(others)), lambda: product_expr(1 + len(others)))
            for j in range(s):
                leaves = {"v0": f"prior:{x}[{j}]"}
                leaves.update({f"v{i + 1}": f"lam:{o}->{x}[{j}]" for i, o in enumerate(others)})
                out = b.lower_tree(tree, f"{x}_pi_{c}_j{j}", f"{x}:pi", leaves)
                b.produce(f"pi:{x}->{c}[{j}]", out)

        if "bel" in roles:
            tree = tree_for(("mul", 2), lambda: product_expr(2))
            for j in range(s):
                leaves = {"v0": f"prior:{x}[{j}]", "v1": f"lik:{x}[{j}]"}
                out = b.lower_tree(tree, f"{x}_bel_j{j}", f"{x}:bel", leaves)
                b.produce(f"bel:{x}[{j}]", out)
    return b.finish()


def likelihood_module(net: BayesNet, node: str, config: CircuitConfig = CircuitConfig()) -> ComposerNetlist:
    """The multipliers combining ``node``'s child messages, without decoders."""
    return lower_bn(net, config, roles=("lik",), nodes=[node], decomposers=False)


def _flat(u, shape) -> int:
    idx = 0
    for ui, d in zip(u, shape):
        idx = idx * d + ui
    return idx


# -- resources ---------------------------------------------------------------------

@dataclass(frozen=True)
class ResourceCount:
    smtj: int
    amplifiers: int
    decomposer_elements: int
    stage_depth: int
    instances: int

    def as_dict(self) -> dict:
        return {"smtj": self.smtj, "amplifiers": self.amplifiers,
                "decomposer_elements": self.decomposer_elements,
                "stage_depth": self.stage_depth, "instances": self.instances}


def count_resources(nl: ComposerNetlist) -> ResourceCount:
    """Device counts under these conventions:

    a ``pc`` holds n devices; every multiplier operand not driven by a
    ``pc`` instance is programmed into n devices of its own; a ``decomp``
    has n(k-1) elements of two devices each; a ``mul`` uses two amplifiers
    (operand adjuster and inverting output) and an ``addmul`` two per term.
    """
    drivers = nl.drivers()
    smtj = amps = elements = 0
    for inst in nl.instances.values():
        if inst.kind == "pc":
            smtj += inst.n
        elif inst.kind in ("mul", "addmul"):
            for port in inst.input_ports():
                src = drivers.get(f"{inst.id}.{port}")
                if src is None or nl.instances[_split_port(src)[0]].kind != "pc":
                    smtj += inst.n
            amps += 2 * inst.terms
        else:
            elements += inst.n * (inst.k - 1)
            smtj += 2 * inst.n * (inst.k - 1)
    return ResourceCount(smtj, amps, elements, stage_depth(nl), len(nl.instances))


def stage_depth(nl: ComposerNetlist) -> int:
    """Longest chain of computing stages (a lone ``pc`` counts as one)."""
    if not nl.instances:
        return 0
    deps = {i: [] for i in nl.instances}
    for src, dst in nl.wires:
        deps[_split_port(dst)[0]].append(_split_port(src)[0])
    depth = {}
    for iid in nl.topological_order():
        inst = nl.instances[iid]
        upstream = max((depth[d] for d in deps[iid]), default=0)
        if inst.kind == "pc":
            depth[iid] = 0
        elif inst.kind == "decomp":
            # a decoder reading a composer directly makes that readout a stage
            reads_pc = any(nl.instances[d].kind == "pc" for d in deps[iid])
            depth[iid] = upstream + (1 if reads_pc else 0)
        else:
            depth[iid] = upstream + 1
    best = max(depth.values())
    return best if best > 0 else 1


# -- simulation ----------------------------------------------------------------------

@dataclass
class NetlistResult:
    analog: dict    # instance id -> analog output of mul/addmul (and pc readouts)
    vectors: dict   # instance id -> vector output of pc/decomp

    def value(self, iid: str) -> float:
        return self.vectors[iid].value


def simulate_netlist(nl: ComposerNetlist, inputs: Mapping[str, object] | None = None,
                     config: CircuitConfig | None = None) -> NetlistResult:
    """Evaluate every instance in dependency order.

    ``inputs`` binds primary input ports (``inst.port``), or signal names
    recorded by the compiler, to vectors or probabilities. Decoders use the same calibrated ladders as the composer
    arithmetic for the stage that drives them.
    """
    inputs = dict(inputs or {})
    for signal, ports in nl.input_signals.items():
        if signal in inputs:
            for port in ports:
                inputs.setdefault(port, inputs[signal])
    drivers = nl.drivers()
    analog, vectors = {}, {}
    for iid in nl.topological_order():
        inst = nl.instances[iid]
        cfg = config or CircuitConfig(n=inst.n, k=inst.k)
        if (cfg.n, cfg.k) != (inst.n, inst.k):
            raise EvaluationError(f"{iid}: instance n={inst.n},k={inst.k} differs from the configuration")
        if inst.kind == "pc":
            vectors[iid] = inst.store
            continue
        if inst.kind == "decomp":
            src = drivers.get(f"{iid}.in")
            if src is None:
                raise EvaluationError(f"{iid}: decoder input is not driven")
            up = nl.instances[_split_port(src)[0]]
            if up.kind == "pc":
                analog[up.id] = analog_output("pc", [up.store], cfg)
                ladder = stage_ladder("pc", 0, 1, cfg)
            elif up.kind in ("mul", "addmul"):
                arity = 2 if up.kind == "mul" else up.terms
                ladder = stage_ladder(up.kind, arity, up.divisor, cfg)
            else:
                raise EvaluationError(f"{iid}: decoder driven by a {up.kind}")
            vectors[iid] = decompose(analog[up.id], ladder)
            continue
        ops = []
        for port in inst.input_ports():
            ref = f"{iid}.{port}"
            src = drivers.get(ref)
            if src is None:
                if ref not in inputs:
                    raise EvaluationError(f"input {ref} is not bound")
                v = inputs[ref]
                ops.append(v if isinstance(v, ProbabilityVector) else encode(float(v), inst.n, inst.k))
            else:
                sid = _split_port(src)[0]
                if sid not in vectors:
                    raise EvaluationError(f"{ref} is driven by an analog output; insert a decoder")
                ops.append(vectors[sid])
        analog[iid] = analog_output(inst.kind, ops, cfg)
    return NetlistResult(analog, vectors)

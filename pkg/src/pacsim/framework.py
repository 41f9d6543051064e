"""Self-similar composer trees: from arithmetic expressions to cascaded stages.

An expression over probabilities is mapped onto elementary composers. A sum
whose every term is a two-operand product becomes one fused add-multiply
circuit; every other nesting is cut by a decomposer that re-quantizes the
intermediate analog value into an n-digit vector before the next stage.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping, Union

import numpy as np

from .circuits import composers as cc
from .circuits.calibration import calibrate_minimax, calibrate_monotone
from .circuits.decomposer import DecomposerLadder, decompose
from .encoding import EncodingParams, ProbabilityVector, encode, parse_vector
from .errors import BuildError, EvaluationError, ParseError

OPERATORS = {"SUM": "SUM", "MUL": "MUL", "SOP": "SOP", "SUM_OF_PRODUCTS": "SOP"}


# -- expressions ---------------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    """A value stored persistently in a composer (e.g. a CPT entry)."""

    value: Union[float, ProbabilityVector]

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Op:
    kind: str
    children: tuple
    divisor: int | None = None  # sums only; defaults to the child count

    def __post_init__(self):
        if self.kind not in ("SUM", "MUL", "SOP"):
            raise BuildError(f"unknown operator {self.kind!r}")
        object.__setattr__(self, "children", tuple(self.children))

    def __str__(self):
        return f"{self.kind}({','.join(str(c) for c in self.children)})"


ProbExpr = Union[Leaf, Const, Op]


def SUM(*children, divisor=None):
    return Op("SUM", children, divisor)


def MUL(*children):
    return Op("MUL", children)


def SOP(*children, divisor=None):
    return Op("SOP", children, divisor)


_TOKEN = re.compile(r"\s*(?:(k\d+:[0-9a-zA-Z]+)|([A-Za-z_][A-Za-z0-9_.]*)|(\d+(?:\.\d*)?|\.\d+)|(.))")


def parse_expr(text: str) -> ProbExpr:
    """Parse prefix notation such as ``SUM(MUL(Pa,Pb),MUL(Pc,Pd))``."""
    tokens = []
    for m in _TOKEN.finditer(text):
        vec, name, num, punct = m.groups()
        if vec:
            tokens.append(("vec", vec))
        elif name:
            tokens.append(("name", name))
        elif num:
            tokens.append(("num", num))
        elif punct and not punct.isspace():
            tokens.append(("p", punct))
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, None)

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok[0] is None or (expected and tok != ("p", expected)):
            raise ParseError(f"expected {expected or 'token'} at position {pos} in {text!r}")
        pos += 1
        return tok

    def expr():
        kind, val = take()
        if kind == "vec":
            return Const(parse_vector(val))
        if kind == "num":
            v = float(val)
            if not 0 <= v <= 1:
                raise ParseError(f"constant {v} outside [0, 1]")
            return Const(v)
        if kind == "name":
            op = OPERATORS.get(val.upper())
            if op and peek() == ("p", "("):
                take("(")
                kids = [expr()]
                while peek() == ("p", ","):
                    take(",")
                    kids.append(expr())
                take(")")
                return Op(op, tuple(kids))
            return Leaf(val)
        raise ParseError(f"unexpected {val!r} in {text!r}")

    out = expr()
    if pos != len(tokens):
        raise ParseError(f"trailing input in {text!r}")
    return out


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class CircuitConfig:
    """Circuit constants shared by every stage of a composer tree.

    ``first_stage`` selects how multiplier operand A is read out before the
    amplifier: ``"voltage"`` (unloaded, non-linear) or ``"current"``
    (loaded and linear, converted by a transimpedance amplifier).
    ``ladder`` picks the calibration of decoders behind non-linear
    multiplier stages: ``"minimax"`` or ``"diagonal"``.
    """

    n: int = 10
    k: int = 2
    params: EncodingParams = EncodingParams()
    v_ref: float = 1.0
    gain: float = 1.0
    first_stage: str = "voltage"
    ladder: str = "minimax"
    sample_cap: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.params.k != self.k:
            object.__setattr__(self, "params", replace(self.params, k=self.k))
        if self.first_stage not in ("voltage", "current"):
            raise BuildError(f"unknown first-stage readout {self.first_stage!r}")
        if self.ladder not in ("minimax", "diagonal"):
            raise BuildError(f"unknown ladder calibration {self.ladder!r}")

    @property
    def levels(self) -> int:
        return self.n * (self.k - 1)

    def composer(self, v: ProbabilityVector) -> cc.ProbabilityComposer:
        return cc.ProbabilityComposer(v, self.params, self.v_ref)


# -- trees -----------------------------------------------------------------------

@dataclass(eq=False)
class TreeNode:
    """One node of a composer tree.

    kinds: ``pc`` (a Probability Composer holding a leaf or constant),
    ``add``, ``mul``, ``addmul`` (stages), and ``term`` (a product fused
    inside an add-multiply, with no decomposer of its own).
    """

    kind: str
    children: list = field(default_factory=list)
    leaf: str | None = None
    const: object = None
    level: int = 0
    scale: int = 1
    divisor: int = 1
    node_id: str = ""
    ladder: DecomposerLadder | None = None
    stored: ProbabilityVector | None = None

    @property
    def is_stage(self) -> bool:
        return self.kind in ("pc", "add", "mul", "addmul")

    def operands(self):
        if self.kind == "addmul":
            return [op for term in self.children for op in term.children]
        return self.children

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass(eq=False)
class ComposerTree:
    root: TreeNode
    config: CircuitConfig | None = None

    @property
    def levels(self) -> int:
        """Number of composer levels (the n of the recursion)."""
        return self.root.level + 1

    def stages(self) -> list[TreeNode]:
        """Nodes followed by a decomposer, children before parents."""
        out = []

        def visit(node, is_root):
            for op in node.operands():
                if op.kind != "pc":
                    visit(op, False)
            if node.kind != "pc" or is_root:
                out.append(node)

        visit(self.root, True)
        return out

    @property
    def inter_stage_decomposers(self) -> int:
        return len(self.stages()) - 1

    @property
    def stage_depth(self) -> int:
        def depth(node):
            inner = [depth(op) for op in node.operands() if op.kind != "pc"]
            return 1 + max(inner, default=0)

        return depth(self.root)


def build_tree(expr: ProbExpr) -> ComposerTree:
    counter = itertools.count()

    def new_id(kind):
        return f"{kind}{next(counter)}"

    def operand(e):
        node = build(e)
        if node.kind == "term":
            raise BuildError("internal: stray product term")
        return node

    def build(e) -> TreeNode:
        if isinstance(e, Leaf):
            return TreeNode("pc", leaf=e.name, node_id=new_id("pc"))
        if isinstance(e, Const):
            return TreeNode("pc", const=e.value, node_id=new_id("pc"))
        if not isinstance(e, Op):
            raise BuildError(f"not an expression: {e!r}")
        if e.kind == "MUL":
            if len(e.children) < 2:
                raise BuildError("MUL needs at least two operands")
            a, b = (operand(c) for c in _binary_mul(e).children)
            return _stage("mul", [a, b], new_id("mul"), divisor=1)
        # sums
        if len(e.children) < 2:
            raise BuildError(f"{e.kind} needs at least two operands")
        divisor = e.divisor if e.divisor is not None else len(e.children)
        if divisor < 1:
            raise BuildError("sum divisor must be positive")
        products = [c for c in e.children if isinstance(c, Op) and c.kind == "MUL"]
        if len(products) == len(e.children):
            terms = []
            for c in e.children:
                lhs, rhs = (operand(x) for x in _binary_mul(c).children)
                terms.append(_stage("term", [lhs, rhs], new_id("term"), divisor=1))
            return _stage("addmul", terms, new_id("addmul"), divisor=divisor)
        if e.kind == "SOP":
            raise BuildError("SOP children must all be products")
        kids = [operand(c) for c in e.children]
        return _stage("add", kids, new_id("add"), divisor=divisor)

    return ComposerTree(build(expr))


def _binary_mul(e: Op) -> Op:
    """Balance a wide product into a binary tree of two-operand products."""
    if len(e.children) <= 2:
        return e
    half = (len(e.children) + 1) // 2
    left, right = e.children[:half], e.children[half:]
    lhs = left[0] if len(left) == 1 else Op("MUL", left)
    rhs = right[0] if len(right) == 1 else Op("MUL", right)
    return Op("MUL", (lhs, rhs))


def _stage(kind, children, node_id, divisor):
    node = TreeNode(kind, children=list(children), node_id=node_id, divisor=divisor)
    stage_kids = [c for c in node.operands() if c.kind != "pc"]
    if kind == "addmul":
        node.level = 1 + max(t.level for t in children)
    else:
        node.level = 0 if not stage_kids else 1 + max(c.level for c in stage_kids)
    if kind in ("mul", "term"):
        node.scale = children[0].scale * children[1].scale
    else:
        scales = {c.scale for c in children}
        if len(scales) != 1:
            raise BuildError(f"{kind} operands carry different scale factors {sorted(scales)}")
        node.scale = divisor * scales.pop()
    return node


# -- stage transfer functions and ladders ------------------------------------

def _fraction(s, cfg: CircuitConfig):
    """Voltage-mode transfer of a composer with digit sum ``s`` (may be array)."""
    return s / (s + 2.0 * cfg.n * cfg.params.eps)


def _stage1(values, cfg: CircuitConfig):
    """Amplified stage-1 voltage for operand values (array)."""
    s = np.asarray(values) * cfg.levels
    if cfg.first_stage == "voltage":
        return cfg.gain * cfg.v_ref * _fraction(s, cfg)
    return cfg.gain * cfg.v_ref * np.asarray(values)


def _sum_of_products_analog(a, b, cfg: CircuitConfig):
    """Ideal add-multiply (or multiply) output current for value arrays."""
    return _stage1(a, cfg) * (np.asarray(b) * cfg.levels) / cfg.params.beta


def _grid(cfg: CircuitConfig):
    return np.arange(cfg.levels + 1) / cfg.levels


@lru_cache(maxsize=256)
def stage_ladder(kind: str, arity: int, divisor: int, cfg: CircuitConfig) -> DecomposerLadder:
    """Calibrated decoder behind a stage; cached per stage signature."""
    N = cfg.levels
    if kind == "pc":
        return calibrate_monotone(lambda x: cfg.v_ref * _fraction(x * N, cfg), cfg.n, cfg.k, cfg.v_ref)
    if kind == "add":
        return calibrate_monotone(
            lambda x: cfg.v_ref * (x * divisor * N) / (x * divisor * N + 2.0 * arity * cfg.n * cfg.params.eps),
            cfg.n, cfg.k, cfg.v_ref)
    if kind not in ("mul", "addmul"):
        raise EvaluationError(f"no ladder for stage kind {kind!r}")
    terms = arity if kind == "addmul" else 1
    if cfg.first_stage == "current":
        return calibrate_monotone(
            lambda x: cfg.gain * cfg.v_ref * N * x * divisor / cfg.params.beta, cfg.n, cfg.k, cfg.v_ref)
    if cfg.ladder == "diagonal":
        def transfer(x):
            y = math.sqrt(min(x * divisor / terms, 1.0))
            return terms * float(_analog_for(kind, np.array([[y, y]]), cfg)[0])
        return calibrate_monotone(transfer, cfg.n, cfg.k, cfg.v_ref)
    samples = _enumerate_operands(2 * terms, cfg)
    analog = _analog_for(kind, samples, cfg)
    products = samples[:, 0::2] * samples[:, 1::2]
    targets = products.sum(axis=1) / divisor
    return calibrate_minimax(analog, targets, cfg.n, cfg.k, cfg.v_ref).ladder


def _analog_for(kind, samples, cfg):
    a = samples[:, 0::2]
    b = samples[:, 1::2]
    if kind == "mul":
        return _stage1(a[:, 0], cfg) * _fraction(b[:, 0] * cfg.levels, cfg)
    return _sum_of_products_analog(a, b, cfg).sum(axis=1)


def _enumerate_operands(count: int, cfg: CircuitConfig) -> np.ndarray:
    """All operand-level combinations, or a seeded sample when too many."""
    grid = _grid(cfg)
    total = len(grid) ** count
    if total <= cfg.sample_cap:
        return np.array(list(itertools.product(grid, repeat=count)))
    rng = np.random.default_rng([cfg.seed, count, cfg.levels])
    idx = rng.integers(0, len(grid), size=(cfg.sample_cap, count))
    corners = np.array(list(itertools.product([0, len(grid) - 1], repeat=min(count, 12))))
    if count <= 12:
        idx = np.vstack([corners, idx])
    return grid[idx]


# -- evaluation ----------------------------------------------------------------

def calibrate_tree(tree: ComposerTree, config: CircuitConfig) -> ComposerTree:
    """Attach a ladder to every stage and encode stored constants."""
    tree.config = config
    for node in tree.root.walk():
        if node.kind == "pc" and node.const is not None:
            c = node.const
            node.stored = c if isinstance(c, ProbabilityVector) else encode(float(c), config.n, config.k)
    for node in tree.stages():
        node.ladder = stage_ladder(node.kind, _arity(node), node.divisor, config)
    return tree


def _arity(node):
    return len(node.children)


@dataclass(frozen=True)
class StageRecord:
    node_id: str
    kind: str
    level: int
    analog: float
    target: float
    decoded: ProbabilityVector
    error: float


@dataclass(frozen=True)
class EvalResult:
    analog: float
    decoded: ProbabilityVector
    value: float
    scale: int
    stage_trace: tuple

    def trace_report(self) -> str:
        lines = [f"{'stage':<10} {'kind':<7} {'lvl':>3} {'analog':>14} {'target':>10} "
                 f"{'decoded':>10} {'error':>10}  vector"]
        for r in self.stage_trace:
            lines.append(f"{r.node_id:<10} {r.kind:<7} {r.level:>3} {r.analog:>14.8g} {r.target:>10.6f} "
                         f"{r.decoded.value:>10.6f} {r.error:>10.6f}  {r.decoded}")
        lines.append(f"result {self.value:.6f} (decoded {self.decoded.value:.6f} x scale {self.scale})")
        return "\n".join(lines)


def stage_analog(node: TreeNode, vectors, cfg: CircuitConfig) -> float:
    """Analog output of one stage from its operand vectors."""
    return analog_output(node.kind, vectors, cfg)


def analog_output(kind: str, vectors, cfg: CircuitConfig) -> float:
    """Analog output of a ``pc``/``add``/``mul``/``addmul`` stage.

    Multiplier operands are ordered (a0, b0, a1, b1, ...).
    """
    pcs = [cfg.composer(v) for v in vectors]
    if kind == "pc":
        return cc.readout_voltage(pcs[0])
    if kind == "add":
        return cc.add_voltage(*pcs)
    pairs = list(zip(pcs[0::2], pcs[1::2]))
    if kind == "mul":
        a, b = pairs[0]
        if cfg.first_stage == "voltage":
            return cc.mul_voltage(a, b, cfg.gain)
        return cc.mul_current(a, b, cfg.gain, first_stage="current")
    return cc.add_mul_current(pairs, cfg.gain, first_stage=cfg.first_stage)


def stage_target(node: TreeNode, values) -> float:
    if node.kind == "pc":
        return values[0]
    if node.kind == "add":
        return sum(values) / node.divisor
    products = [a * b for a, b in zip(values[0::2], values[1::2])]
    return sum(products) / node.divisor


def evaluate_tree(tree: ComposerTree, bindings: Mapping[str, object]) -> EvalResult:
    cfg = tree.config
    if cfg is None:
        raise EvaluationError("tree has not been calibrated")
    trace = []

    def vector_of(node) -> ProbabilityVector:
        if node.kind == "pc" and node is not tree.root:
            return leaf_vector(node)
        return run_stage(node)[1]

    def leaf_vector(node):
        if node.stored is not None:
            return node.stored
        if node.const is not None:
            raise EvaluationError(f"constant at {node.node_id} has not been stored")
        try:
            bound = bindings[node.leaf]
        except KeyError:
            raise EvaluationError(f"leaf {node.leaf!r} is not bound") from None
        if isinstance(bound, ProbabilityVector):
            if bound.n != cfg.n or bound.k != cfg.k:
                raise EvaluationError(f"leaf {node.leaf!r} has n={bound.n}, k={bound.k}; "
                                      f"tree expects n={cfg.n}, k={cfg.k}")
            return bound
        return encode(float(bound), cfg.n, cfg.k)

    def run_stage(node):
        if node.ladder is None:
            raise EvaluationError(f"stage {node.node_id} has no calibrated ladder")
        if node.kind == "pc":
            vectors = [leaf_vector(node)]
        else:
            vectors = [vector_of(op) for op in node.operands()]
        analog = stage_analog(node, vectors, cfg)
        target = stage_target(node, [v.value for v in vectors])
        out = decompose(analog, node.ladder)
        trace.append(StageRecord(node.node_id, node.kind, node.level, analog, target, out,
                                 abs(out.value - target)))
        return analog, out

    analog, out = run_stage(tree.root)
    return EvalResult(analog, out, out.value * tree.root.scale, tree.root.scale, tuple(trace))


def compile_expr(expr, config: CircuitConfig) -> ComposerTree:
    """Parse (if needed), build and calibrate in one call."""
    if isinstance(expr, str):
        expr = parse_expr(expr)
    return calibrate_tree(build_tree(expr), config)

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from pacsim.bayes import (BayesNet, BayesNode, ComposerArithmetic, belief, bp_infer, exact_enumerate, fork_polytree,
                          format_bn, lambda_to_parent, likelihood, linf_gap, parse_bn, pi_to_child, prior,
                          random_polytree)
from pacsim.errors import CapacityError, InconsistentEvidenceError, ParseError, SchedulingError, StructureError
from pacsim.framework import CircuitConfig

CPT = np.array([[0.9, 0.1], [0.3, 0.7]])
CHAIN_BN = "node A states=2 prior=0.5,0.5\nnode X states=2 parents=A cpt=0.9,0.1;0.3,0.7\n"


def chain():
    return parse_bn(CHAIN_BN)


def x_node():
    return BayesNode("X", 2, ("A",), CPT)


# -- message operations -------------------------------------------------------------------

def test_likelihood_examples():
    assert likelihood(4, []).tolist() == [1, 1, 1, 1]
    lam = likelihood(4, [[0.5] * 4, [0.2, 0.4, 0.6, 0.8]])
    assert lam == pytest.approx([0.1, 0.2, 0.3, 0.4])
    assert likelihood(4, [], evidence=2).tolist() == [0, 0, 1, 0]
    with pytest.raises(SchedulingError):
        likelihood(4, [None, [1, 1, 1, 1]])


def test_prior_examples():
    root = BayesNode("R", 4, (), np.full(4, 0.25))
    assert prior(root).tolist() == [0.25] * 4
    assert prior(x_node(), [[1.0, 0.0]]) == pytest.approx([0.9, 0.1])
    assert prior(x_node(), [[0.6, 0.4]]) == pytest.approx([0.66, 0.34])
    with pytest.raises(SchedulingError):
        prior(x_node(), [None])


def test_belief_examples():
    assert belief([0.5, 0.5], [1, 1]).tolist() == [0.5, 0.5]
    bel = belief([0.66, 0.34], [0.2, 0.8])
    assert bel == pytest.approx(np.array([0.132, 0.272]) / 0.404)
    assert bel[0] == pytest.approx(0.3267, abs=1e-4)
    with pytest.raises(InconsistentEvidenceError):
        belief([0.5, 0.5], [0, 0])


def test_lambda_to_parent_examples():
    assert lambda_to_parent(x_node(), [1, 1], [None], 0) == pytest.approx([1, 1])
    assert lambda_to_parent(x_node(), [1, 0], [None], 0) == pytest.approx([0.9, 0.3])
    assert lambda_to_parent(x_node(), [0.2, 0.8], [None], 0) == pytest.approx([0.26, 0.62])


def test_pi_to_child_examples():
    assert pi_to_child([0.2, 0.6], []) == pytest.approx([0.25, 0.75])
    assert pi_to_child([0.5, 0.5], [[0.4, 0.6]]) == pytest.approx([0.4, 0.6])
    assert pi_to_child([0.5, 0.5], [[1.0, 0.0]]).tolist() == [1.0, 0.0]


# -- inference -----------------------------------------------------------------------------

def test_root_prior_is_its_belief():
    net = BayesNet([BayesNode("R", 3, (), np.array([0.2, 0.3, 0.5]))])
    assert bp_infer(net).beliefs["R"] == pytest.approx([0.2, 0.3, 0.5])
    assert exact_enumerate(net)["R"] == pytest.approx([0.2, 0.3, 0.5])


def test_chain_posterior_is_exact():
    assert bp_infer(chain(), {"X": 0}).beliefs["A"].tolist() == [0.75, 0.25]
    assert exact_enumerate(chain(), {"X": 0})["A"].tolist() == [0.75, 0.25]


def test_five_node_polytree_matches_enumeration():
    rng = np.random.default_rng(5)

    def cpt(*shape):
        return rng.dirichlet(np.ones(shape[-1]), size=int(np.prod(shape[:-1]))).reshape(shape)

    net = BayesNet([
        BayesNode("A", 3, (), cpt(3)), BayesNode("B", 2, (), cpt(2)),
        BayesNode("X", 4, ("A", "B"), cpt(3, 2, 4)),
        BayesNode("Y", 2, ("X",), cpt(4, 2)), BayesNode("Z", 3, ("X",), cpt(4, 3)),
    ])
    for evidence in ({}, {"Y": 1}, {"Y": 0, "Z": 2}, {"X": 3}, {"A": 0, "Z": 1}):
        bp = bp_infer(net, evidence).beliefs
        assert linf_gap(bp, exact_enumerate(net, evidence)) <= 1e-12
        brute = oracles.joint_posterior({x: net[x].cpt for x in net.nodes},
                                        {x: net[x].parents for x in net.nodes},
                                        {x: net[x].states for x in net.nodes}, evidence)
        assert linf_gap(bp, brute) <= 1e-12


def test_uniform_network_has_uniform_beliefs():
    net = fork_polytree(cpts={x: np.full((4, 4), 0.25) for x in "XYZ"})
    for bel in exact_enumerate(net).values():
        assert bel == pytest.approx([0.25] * 4)


def test_enumeration_capacity_limit():
    with pytest.raises(CapacityError):
        exact_enumerate(fork_polytree(0), max_states=100)


def random_case(seed, max_nodes=6):
    rng = np.random.default_rng(seed)
    net = random_polytree(rng, int(rng.integers(1, max_nodes + 1)), max_states=4)
    evidence = {x: int(rng.integers(net[x].states)) for x in net.nodes if rng.random() < 0.3}
    return rng, net, evidence


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_exact_backend_matches_enumeration(seed):
    _, net, evidence = random_case(seed)
    bp = bp_infer(net, evidence)
    assert linf_gap(bp.beliefs, exact_enumerate(net, evidence)) <= 1e-12
    for x, bel in bp.beliefs.items():
        assert np.all(bel >= 0) and bel.sum() == pytest.approx(1.0, abs=1e-12)
        if x in evidence:
            assert bel.tolist() == [float(i == evidence[x]) for i in range(net[x].states)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_message_order_independence(seed):
    rng, net, evidence = random_case(seed)
    base = bp_infer(net, evidence).beliefs
    order = list(net.nodes)
    rng.shuffle(order)
    assert linf_gap(bp_infer(net, evidence, order=order).beliefs, base) <= 1e-12

    def composer(order=None):
        try:
            return bp_infer(net, evidence, backend="composer", order=order).beliefs
        except InconsistentEvidenceError:
            return None                     # below the composer's resolution

    comp, comp_shuffled = composer(), composer(order)
    assert (comp is None) == (comp_shuffled is None)
    if comp is not None:
        assert linf_gap(comp, comp_shuffled) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_composer_beliefs_are_distributions(seed):
    _, net, evidence = random_case(seed, max_nodes=4)
    try:
        result = bp_infer(net, evidence, backend="composer")
    except InconsistentEvidenceError:
        assume(False)
    for x, bel in result.beliefs.items():
        assert np.all(bel >= 0) and bel.sum() == pytest.approx(1.0, abs=1e-12)
        if x in evidence:
            assert bel.tolist() == [float(i == evidence[x]) for i in range(net[x].states)]


def test_composer_gap_shrinks_with_n():
    net = fork_polytree(7)
    evidence = {"Y": 1, "Z": 3}
    exact = bp_infer(net, evidence).beliefs
    gaps = [linf_gap(bp_infer(net, evidence, backend="composer", config=CircuitConfig(n=n, first_stage="current"))
                     .beliefs, exact) for n in (20, 50)]
    assert gaps[1] < gaps[0] <= 0.3


def test_composer_reports_unresolvable_likelihoods():
    """At n=10 the two observed leaves send quantized messages with disjoint support."""
    net = fork_polytree(7)
    with pytest.raises(InconsistentEvidenceError):
        bp_infer(net, {"Y": 1, "Z": 3}, backend="composer", config=CircuitConfig(n=10, first_stage="current"))


def test_composer_arithmetic_products():
    arith = ComposerArithmetic(CircuitConfig(n=10, first_stage="current"))
    out = arith.hadamard([np.array([1.0, 0.5, 0.0]), np.array([1.0, 1.0, 0.7])])
    assert out == pytest.approx([1.0, 0.5, 0.0], abs=0.05)
    table = arith.stored_cpt(x_node())
    assert [v.value for v in table.ravel()] == [0.9, 0.1, 0.3, 0.7]


def test_structure_errors():
    with pytest.raises(StructureError):
        BayesNet([BayesNode("A", 2, (), np.array([0.5, 0.5])),
                  BayesNode("B", 2, ("A",), CPT), BayesNode("C", 2, ("A", "B"), np.full((2, 2, 2), 0.5))])
    with pytest.raises(StructureError):
        BayesNode("A", 2, (), np.array([0.6, 0.6]))
    with pytest.raises(StructureError):
        bp_infer(chain(), {"Q": 0})
    with pytest.raises(StructureError):
        bp_infer(chain(), {"X": 2})


def test_contradictory_evidence():
    net = BayesNet([BayesNode("A", 2, (), np.array([1.0, 0.0])),
                    BayesNode("X", 2, ("A",), np.array([[1.0, 0.0], [0.0, 1.0]]))])
    with pytest.raises(InconsistentEvidenceError):
        bp_infer(net, {"X": 1})
    with pytest.raises(InconsistentEvidenceError):
        exact_enumerate(net, {"X": 1})


# -- text format ----------------------------------------------------------------------------------

@given(st.integers(0, 2 ** 32 - 1))
def test_bn_text_round_trip(seed):
    _, net, _ = random_case(seed)
    again = parse_bn(format_bn(net))
    assert list(again.nodes) == list(net.nodes)
    for x in net.nodes:
        assert again[x].parents == net[x].parents
        assert np.array_equal(again[x].cpt, net[x].cpt)


@pytest.mark.parametrize("text, line", [
    ("node A states=2 prior=0.5,0.5\nnode B states=2 parents=A\n", 2),
    ("node A states=2 prior=0.5,0.6\n", 1),
    ("# comment\nnode A states=x prior=1\n", 2),
    ("node A states=2 prior=0.5,0.5\nedge A B\n", 2),
    ("node A states=2 prior=0.5,0.5\nnode B states=2 parents=A cpt=0.5,0.5\n", 2),
])
def test_bn_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        parse_bn(text)
    assert info.value.line == line

"""Bayesian networks, Pearl propagation and the enumeration oracle."""

from .enumerate import exact_enumerate
from .network import BayesNet, BayesNode, fork_polytree, format_bn, load_bn, parse_bn, random_polytree
from .pearl import (
    BPResult,
    ComposerArithmetic,
    ExactArithmetic,
    belief,
    bp_infer,
    lambda_to_parent,
    likelihood,
    linf_gap,
    pi_to_child,
    prior,
    store_cpt,
)

__all__ = [
    "BPResult", "BayesNet", "BayesNode", "ComposerArithmetic", "ExactArithmetic", "belief",
    "bp_infer", "exact_enumerate", "fork_polytree", "format_bn", "lambda_to_parent", "likelihood",
    "linf_gap", "load_bn", "parse_bn", "pi_to_child", "prior", "random_polytree", "store_cpt",
]

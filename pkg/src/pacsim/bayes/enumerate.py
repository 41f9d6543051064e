"""Brute-force posteriors from the full joint distribution."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..errors import CapacityError, InconsistentEvidenceError
from .network import BayesNet

MAX_JOINT_STATES = 10 ** 7


def exact_enumerate(net: BayesNet, evidence: Mapping[str, int] | None = None,
                    max_states: int = MAX_JOINT_STATES) -> dict:
    """Posterior marginal of every node by summing the joint table."""
    size = net.joint_size()
    if size > max_states:
        raise CapacityError(f"joint table has {size} states (limit {max_states})")
    ids = list(net.nodes)
    axis = {x: i for i, x in enumerate(ids)}
    joint = np.ones([net[x].states for x in ids])
    for x in ids:
        node = net[x]
        # move the factor's axes into joint order and broadcast
        own = [axis[p] for p in node.parents] + [axis[x]]
        order = np.argsort(own)
        factor = np.transpose(node.cpt, order)
        shape = [1] * len(ids)
        for a in sorted(own):
            shape[a] = net[ids[a]].states
        joint = joint * factor.reshape(shape)
    for x, state in (evidence or {}).items():
        mask = np.zeros(net[x].states)
        mask[int(state)] = 1.0
        shape = [1] * len(ids)
        shape[axis[x]] = net[x].states
        joint = joint * mask.reshape(shape)
    total = joint.sum()
    if not total > 0:
        raise InconsistentEvidenceError("evidence has zero probability")
    out = {}
    for x in ids:
        others = tuple(i for i in range(len(ids)) if i != axis[x])
        out[x] = joint.sum(axis=others) / total
    return out

"""Exhaustive transfer sweeps of the elementary composers.

Every quantized input combination is evaluated twice, by the closed form
and by solving the circuit network, in voltage mode (unloaded output) and in
current mode (finite load).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..encoding import EncodingParams, ProbabilityVector, thermometer
from ..errors import ConfigurationError
from . import composers as cc
from .mna import mna_solve

KINDS = ("pc", "add", "mul", "addmul")
MAX_ROWS = 2_000_000


@dataclass(frozen=True)
class SweepSettings:
    n: int = 10
    k: int = 2
    params: EncodingParams = EncodingParams()
    v_ref: float = 1.0
    gain: float = 1.0
    corrected: bool = True
    first_stage: str = "voltage"
    load_fraction: float = 1e-3      # current-mode load as a fraction of R_PC,min
    stage1_fraction: float = 1e-9    # sense resistor of a current first stage

    def composer(self, v: ProbabilityVector) -> cc.ProbabilityComposer:
        return cc.ProbabilityComposer(v, self.params, self.v_ref)


def rel_diff(a: float, b: float, floor: float) -> float:
    """|a - b| relative to the larger magnitude, or to ``floor`` near zero."""
    return abs(a - b) / max(abs(a), abs(b), floor)


def _inputs(kind: str, s: SweepSettings):
    if kind == "pc":
        total = s.k ** s.n
        if total > MAX_ROWS:
            raise ConfigurationError(f"{total} digit configurations exceed the sweep limit")
        for digits in itertools.product(range(s.k), repeat=s.n):
            yield (ProbabilityVector(digits[::-1], s.k),)
        return
    levels = [thermometer(t, s.n, s.k) for t in range(s.n * (s.k - 1) + 1)]
    arity = 4 if kind == "addmul" else 2
    if len(levels) ** arity > MAX_ROWS:
        raise ConfigurationError(f"{len(levels) ** arity} level combinations exceed the sweep limit")
    yield from itertools.product(levels, repeat=arity)


def sweep_header(kind: str) -> list[str]:
    if kind not in KINDS:
        raise ConfigurationError(f"unknown circuit kind {kind!r}; choose from {', '.join(KINDS)}")
    if kind == "pc":
        names = ["digits", "p"]
    elif kind == "addmul":
        names = ["p_a0", "p_b0", "p_a1", "p_b1"]
    else:
        names = ["p_a", "p_b"]
    return names + ["v_closed", "v_mna", "v_rel_diff", "i_closed", "i_mna", "i_rel_diff"]


def sweep_rows(kind: str, settings: SweepSettings = SweepSettings()):
    """Yield one row per input combination, as in :func:`sweep_header`."""
    sweep_header(kind)
    s = settings
    # exact zeros come out of the solver as cancellation residue (~1e-16 of
    # full scale), so differences are taken relative to at least 1e-6 of it
    vfloor = 1e-6 * s.v_ref * s.gain
    ifloor = 1e-6 * s.v_ref * s.gain * s.n * (s.k - 1) / s.params.beta
    for vecs in _inputs(kind, s):
        pcs = [s.composer(v) for v in vecs]
        head = [str(vecs[0]), vecs[0].value] if kind == "pc" else [v.value for v in vecs]
        r_load = s.load_fraction * min(c.r_min for c in pcs)
        rl1 = s.stage1_fraction * pcs[0].r_min
        v_closed = v_mna = None
        if kind == "pc":
            if s.corrected:
                v_closed = cc.readout_voltage(pcs[0])
                v_mna = mna_solve(cc.readout_network(pcs[0]))["out"]
            i_closed = cc.readout_current(pcs[0], r_load, s.corrected)
            i_mna = mna_solve(cc.readout_network(pcs[0], r_load, s.corrected))["out"] / r_load
        elif kind == "add":
            if s.corrected:
                v_closed = cc.add_voltage(*pcs)
                v_mna = mna_solve(cc.add_network(*pcs))["out"]
            i_closed = cc.add_current(*pcs, r_load=r_load, corrected=s.corrected)
            i_mna = mna_solve(cc.add_network(*pcs, r_load=r_load, corrected=s.corrected))["out"] / r_load
        else:
            pairs = list(zip(pcs[0::2], pcs[1::2]))
            if kind == "mul" and s.corrected:
                v_closed = cc.first_stage_voltage(pcs[0], s.gain, s.first_stage, stage1_load=rl1) \
                    * pcs[1].digit_sum / (pcs[1].digit_sum + 2.0 * pcs[1].n * s.params.eps)
                v_mna = mna_solve(cc.mul_network(pcs[0], pcs[1], s.gain, None, True, s.first_stage, rl1))["out"]
            r_load = s.load_fraction * min(b.r_min for _, b in pairs)
            i_closed = cc.add_mul_current(pairs, s.gain, r_load, s.corrected, s.first_stage, stage1_load=rl1)
            net = cc.add_mul_network(pairs, s.gain, r_load, s.corrected, s.first_stage, rl1)
            i_mna = mna_solve(net)["out"] / r_load
        v_rel = "" if v_closed is None else rel_diff(v_closed, v_mna, vfloor)
        yield head + ["" if v_closed is None else v_closed, "" if v_mna is None else v_mna, v_rel,
                      i_closed, i_mna, rel_diff(i_closed, i_mna, ifloor)]


def fmt12(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)

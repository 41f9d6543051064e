"""Closed-form readout of Probability Composers and elementary composers.

Every function here has a matching network builder (``*_network``) whose
node voltages, computed by :func:`pacsim.circuits.mna.mna_solve`, must agree
with the closed form, for ideal and finite loads alike. Digit sums are used throughout so the formulas hold
for any k; for binary devices ``S/n = P``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..encoding import EncodingParams, ProbabilityVector, digit_resistance, encode
from ..errors import ApproximationRegimeError, ConfigurationError, DomainError
from .mna import ResistiveNetwork, mna_solve

LOAD_FRACTION_LIMIT = 0.01


@dataclass(frozen=True)
class ProbabilityComposer:
    """n non-volatile devices in parallel, read out with ``v_ref``."""

    vector: ProbabilityVector
    params: EncodingParams = EncodingParams()
    v_ref: float = 1.0

    def __post_init__(self):
        if self.vector.k != self.params.k:
            raise ConfigurationError(
                f"vector has k={self.vector.k} but encoding params use k={self.params.k}")

    @classmethod
    def from_probability(cls, p: float, n: int, params: EncodingParams = EncodingParams(),
                         v_ref: float = 1.0) -> "ProbabilityComposer":
        return cls(encode(p, n, params.k), params, v_ref)

    @property
    def n(self) -> int:
        return self.vector.n

    @property
    def digit_sum(self) -> int:
        return self.vector.total

    @property
    def probability(self) -> float:
        return self.vector.value

    def resistances(self) -> list[float]:
        return [digit_resistance(d, self.params) for d in self.vector.digits]

    @property
    def r_min(self) -> float:
        """Composer resistance with every digit at its top level."""
        p = self.params
        return p.beta / (self.n * (p.k - 1) + self.n * p.eps)


@dataclass(frozen=True)
class CorrectionCircuit:
    """Branch from ``v_adj`` through ``r_adj`` that cancels the offset current."""

    v_adj: float
    r_adj: float


def correction_for(pc: ProbabilityComposer, v_ref: float | None = None) -> CorrectionCircuit:
    v = pc.v_ref if v_ref is None else v_ref
    return CorrectionCircuit(v_adj=-v, r_adj=pc.params.beta / (pc.n * pc.params.eps))


def composer_conductance(pc: ProbabilityComposer) -> float:
    p = pc.params
    return pc.digit_sum / p.beta + pc.n * p.eps / p.beta


def _offset(pc: ProbabilityComposer) -> float:
    """Offset term n*eps in digit-sum units."""
    return pc.n * pc.params.eps


def _voltage_fraction(pc: ProbabilityComposer) -> float:
    """Voltage-mode transfer S / (S + 2 n eps) of a corrected composer."""
    s = pc.digit_sum
    return s / (s + 2.0 * _offset(pc))


def _check_load(r_load: float, *composers: ProbabilityComposer, limit=LOAD_FRACTION_LIMIT):
    if r_load <= 0:
        raise DomainError("load resistance must be positive")
    r_min = min(c.r_min for c in composers)
    if r_load > limit * r_min:
        raise ApproximationRegimeError(
            f"r_load={r_load:g} exceeds {limit:g} x R_PC,min={r_min:g}; solve the network directly")


def _check_matched(*composers: ProbabilityComposer):
    first = composers[0]
    for c in composers[1:]:
        if c.n != first.n or c.params != first.params or c.v_ref != first.v_ref:
            raise ConfigurationError("composers must share n, encoding params and v_ref")


# -- single composer ---------------------------------------------------------

def readout_current(pc: ProbabilityComposer, r_load: float | None = None, corrected: bool = True,
                    load_limit: float = LOAD_FRACTION_LIMIT) -> float:
    """Output current into a small load.

    With ``r_load=None`` the ideal small-load limit ``v_ref*S/beta`` is
    returned (plus ``n*eps*v_ref/beta`` if uncorrected). A finite load gives
    the exact current, which falls short of the limit by a factor
    ``1 + r_load*G`` with G the conductance seen by the load.
    """
    if r_load is not None:
        _check_load(r_load, pc, limit=load_limit)
    return _loaded_current([(pc.v_ref, pc)], r_load, corrected)


def _loaded_current(drives, r_load, corrected: bool) -> float:
    """Current into ``r_load`` (None: a short) from composers sharing one node.

    ``drives`` pairs each composer with the voltage at its far end; the
    correction branch of each is driven by the negated voltage.
    """
    source = conductance = 0.0
    for v, c in drives:
        beta, off = c.params.beta, _offset(c)
        if corrected:
            source += v * c.digit_sum / beta
            conductance += (c.digit_sum + 2.0 * off) / beta
        else:
            source += v * (c.digit_sum + off) / beta
            conductance += (c.digit_sum + off) / beta
    if r_load is None:
        return source
    return source / (1.0 + r_load * conductance)


def readout_voltage(pc: ProbabilityComposer) -> float:
    """Unloaded output voltage ``v_ref * P / (P + 2 eps)`` (binary devices)."""
    return pc.v_ref * _voltage_fraction(pc)


def readout_network(pc: ProbabilityComposer, r_load: float | None = None, corrected: bool = True,
                    ref: str = "ref", out: str = "out", prefix: str = "",
                    net: ResistiveNetwork | None = None) -> ResistiveNetwork:
    """Digit resistors from ``ref`` to ``out``, correction branch, optional load."""
    net = ResistiveNetwork() if net is None else net
    if ref == "ref" and not prefix:
        net.add_source("ref", net.ground, pc.v_ref)
    for i, r in enumerate(pc.resistances()):
        net.add_resistor(ref, out, r)
    if corrected:
        corr = correction_for(pc)
        adj = prefix + "adj"
        net.add_source(adj, net.ground, corr.v_adj)
        net.add_resistor(adj, out, corr.r_adj)
    if r_load is not None:
        net.add_resistor(out, net.ground, r_load)
    return net


# -- addition ------------------------------------------------------------------

def add_voltage(*composers: ProbabilityComposer) -> float:
    """Parallel adder, voltage mode: ``v_ref * sum S / (sum S + 2 m n eps)``."""
    if len(composers) < 2:
        raise ConfigurationError("addition needs at least two composers")
    _check_matched(*composers)
    s = sum(c.digit_sum for c in composers)
    off = sum(_offset(c) for c in composers)
    return composers[0].v_ref * s / (s + 2.0 * off)


def add_current(*composers: ProbabilityComposer, r_load: float | None = None, corrected: bool = True,
                load_limit: float = LOAD_FRACTION_LIMIT) -> float:
    """Parallel adder into a shared small load."""
    if len(composers) < 2:
        raise ConfigurationError("addition needs at least two composers")
    _check_matched(*composers)
    if r_load is not None:
        _check_load(r_load, *composers, limit=load_limit)
    return _loaded_current([(c.v_ref, c) for c in composers], r_load, corrected)


def add_network(*composers: ProbabilityComposer, r_load: float | None = None,
                corrected: bool = True) -> ResistiveNetwork:
    net = ResistiveNetwork()
    net.add_source("ref", net.ground, composers[0].v_ref)
    for j, c in enumerate(composers):
        readout_network(c, corrected=corrected, ref="ref", out="out", prefix=f"c{j}_", net=net)
    if r_load is not None:
        net.add_resistor("out", net.ground, r_load)
    return net


# -- multiplication ------------------------------------------------------------

def first_stage_voltage(a: ProbabilityComposer, gain: float = 1.0, first_stage: str = "voltage",
                        transimpedance: float | None = None, stage1_load: float | None = None) -> float:
    """Amplified stage-1 voltage that becomes the reference of stage 2.

    ``first_stage="voltage"`` reads ``a`` out unloaded (non-linear in P_A);
    ``"current"`` reads it out in current mode and converts with a
    transimpedance (default ``beta / (n(k-1))``, making the voltage
    ``v_ref * P_A``) before the gain. ``stage1_load`` sets a finite sense
    resistor for the current readout instead of the ideal short.
    """
    if gain <= 0:
        raise DomainError("amplifier gain must be positive")
    if first_stage == "voltage":
        return gain * readout_voltage(a)
    if first_stage == "current":
        rt = default_transimpedance(a) if transimpedance is None else transimpedance
        return gain * rt * _loaded_current([(a.v_ref, a)], stage1_load, True)
    raise ConfigurationError(f"unknown first-stage readout {first_stage!r}")


def default_transimpedance(a: ProbabilityComposer) -> float:
    return a.params.beta / (a.n * (a.params.k - 1))


def mul_voltage(a: ProbabilityComposer, b: ProbabilityComposer, gain: float = 1.0,
                first_stage: str = "voltage") -> float:
    """Two-stage multiplier, voltage mode.

    With the default voltage first stage this is
    ``g v_ref P_A P_B / ((P_A + 2 eps)(P_B + 2 eps))``.
    """
    _check_matched(a, b)
    return first_stage_voltage(a, gain, first_stage) * _voltage_fraction(b)


def mul_current(a: ProbabilityComposer, b: ProbabilityComposer, gain: float = 1.0,
                r_load: float | None = None, corrected: bool = True, first_stage: str = "voltage",
                load_limit: float = LOAD_FRACTION_LIMIT, stage1_load: float | None = None) -> float:
    """Two-stage multiplier, current mode.

    The ideal limit with a voltage first stage is
    ``(n/beta) g v_ref P_A P_B / (P_A + 2 eps)``.
    """
    return add_mul_current([(a, b)], gain=gain, r_load=r_load, corrected=corrected,
                           first_stage=first_stage, load_limit=load_limit, stage1_load=stage1_load)


def add_mul_current(pairs: Sequence[tuple[ProbabilityComposer, ProbabilityComposer]],
                    gain: float = 1.0, r_load: float | None = None, corrected: bool = True,
                    first_stage: str = "voltage", load_limit: float = LOAD_FRACTION_LIMIT,
                    stage1_load: float | None = None) -> float:
    """Sum of products: multiplication units sharing one output node.

    Stage 1 of each unit drives stage 2 (composer B and its correction)
    through ideal amplifiers, so the output obeys the same shared-node
    relation as parallel composers with per-unit drive voltages.
    """
    if not pairs:
        raise ConfigurationError("add-multiply needs at least one product term")
    flat = [c for pair in pairs for c in pair]
    _check_matched(*flat)
    if r_load is not None:
        _check_load(r_load, *[b for _, b in pairs], limit=load_limit)
    drives = [(first_stage_voltage(a, gain, first_stage, stage1_load=stage1_load), b) for a, b in pairs]
    return _loaded_current(drives, r_load, corrected)


def mul_network(a: ProbabilityComposer, b: ProbabilityComposer, gain: float = 1.0,
                r_load: float | None = None, corrected: bool = True, first_stage: str = "voltage",
                stage1_load: float | None = None) -> ResistiveNetwork:
    return add_mul_network([(a, b)], gain, r_load, corrected, first_stage, stage1_load)


def add_mul_network(pairs, gain: float = 1.0, r_load: float | None = None, corrected: bool = True,
                    first_stage: str = "voltage", stage1_load: float | None = None) -> ResistiveNetwork:
    """Network realisation of ``sum_j A_j * B_j``.

    Stage 1 of each term is a corrected composer; an ideal amplifier (VCVS)
    copies ``g`` times its output onto node ``amp<j>`` and an inverting
    amplifier puts ``-g`` times it on ``inv<j>`` for stage 2's correction.
    For a current first stage, a small load converts the stage-1 current and
    the amplifier gain absorbs the transimpedance.
    """
    net = ResistiveNetwork()
    net.add_source("ref", net.ground, pairs[0][0].v_ref)
    for j, (a, b) in enumerate(pairs):
        a_out = f"a{j}_out"
        if first_stage == "voltage":
            readout_network(a, ref="ref", out=a_out, prefix=f"a{j}_", net=net)
            amp_gain = gain
        elif first_stage == "current":
            rl1 = stage1_load if stage1_load is not None else 1e-9 * a.r_min
            readout_network(a, r_load=rl1, ref="ref", out=a_out, prefix=f"a{j}_", net=net)
            amp_gain = gain * default_transimpedance(a) / rl1
        else:
            raise ConfigurationError(f"unknown first-stage readout {first_stage!r}")
        amp, inv = f"amp{j}", f"inv{j}"
        net.add_vcvs(amp, net.ground, a_out, net.ground, amp_gain)
        for r in b.resistances():
            net.add_resistor(amp, "out", r)
        if corrected:
            net.add_vcvs(inv, net.ground, a_out, net.ground, -amp_gain)
            net.add_resistor(inv, "out", correction_for(b).r_adj)
    if r_load is not None:
        net.add_resistor("out", net.ground, r_load)
    return net


def solve_output(net: ResistiveNetwork, node: str = "out") -> float:
    return mna_solve(net)[node]

"""Behavioral models of volatile and non-volatile straintronic MTJs.

Device physics is consumed at the transfer-characteristic level: a tabulated
input-voltage -> rotation-angle curve, a tabulated settle-time curve, and the
tunnelling-magnetoresistance ratio as a function of the rotation angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError

PSI0 = 0  # high-resistance stable orientation
PSI1 = 1  # low-resistance stable orientation

DEFAULT_V_ON = 1.0
DEFAULT_SETTLE_NS = 44.0


def resistance_ratio(theta_deg: float, eta1: float = 0.7, eta2: float = 0.7) -> float:
    """Return R(theta)/R(0) for a soft layer rotated by ``theta_deg`` degrees.

    The free layer starts anti-parallel to the hard layer; ``eta1`` and
    ``eta2`` are the interface spin-injection efficiencies.
    """
    product = eta1 * eta2
    if not 0.0 < product < 1.0:
        raise DomainError(f"eta1*eta2 must lie in (0, 1), got {product}")
    if not 0.0 <= theta_deg <= 180.0:
        raise DomainError(f"rotation angle must lie in [0, 180] degrees, got {theta_deg}")
    return (1.0 - product) / (1.0 - product * math.cos(math.radians(theta_deg)))


def default_transfer_curve(v_on: float = DEFAULT_V_ON, knots: int = 21):
    """Smooth saturating ramp from 0 deg at 0 V to 90 deg at ``v_on``."""
    v = np.linspace(0.0, v_on, knots)
    theta = 90.0 * np.sin(0.5 * math.pi * v / v_on) ** 2
    theta[-1] = 90.0
    return tuple(zip(v.tolist(), theta.tolist()))


def default_delay_curve(v_on: float = DEFAULT_V_ON, settle_ns: float = DEFAULT_SETTLE_NS):
    return ((0.0, settle_ns), (v_on, settle_ns))


@dataclass(frozen=True)
class SmtjParams:
    """Behavioral parameter set of one S-MTJ.

    Resistances are normalized; ``transfer_curve`` maps input voltage to the
    rotation angle in degrees and ``delay_curve`` maps it to settle time in ns.
    The defaults put r_on at the fully-rotated resistance of the volatile
    device, i.e. ``r_on / r_off = resistance_ratio(90)``.
    """

    r_off: float = 1.0
    r_on: float = 0.51
    eta1: float = 0.7
    eta2: float = 0.7
    transfer_curve: tuple = field(default_factory=default_transfer_curve)
    delay_curve: tuple = field(default_factory=default_delay_curve)
    v_threshold: float = 0.5

    def __post_init__(self):
        if not self.r_off > self.r_on > 0:
            raise DomainError("require r_off > r_on > 0")
        if not 0.0 < self.eta1 * self.eta2 < 1.0:
            raise DomainError("require 0 < eta1*eta2 < 1")
        if self.v_threshold <= 0:
            raise DomainError("v_threshold must be positive")
        for name in ("transfer_curve", "delay_curve"):
            curve = tuple((float(v), float(y)) for v, y in getattr(self, name))
            if len(curve) < 2:
                raise DomainError(f"{name} needs at least two points")
            volts = [v for v, _ in curve]
            if any(b <= a for a, b in zip(volts, volts[1:])):
                raise DomainError(f"{name} voltages must be strictly increasing")
            object.__setattr__(self, name, curve)
        thetas = [t for _, t in self.transfer_curve]
        if any(b < a for a, b in zip(thetas, thetas[1:])):
            raise DomainError("transfer_curve must be non-decreasing")
        if thetas[0] < 0.0 or thetas[-1] > 90.0:
            raise DomainError("transfer_curve angles must lie in [0, 90] degrees")
        if any(t <= 0 for _, t in self.delay_curve):
            raise DomainError("delay_curve settle times must be positive")

    @property
    def eta_product(self) -> float:
        return self.eta1 * self.eta2


def _interp(curve: Sequence[tuple[float, float]], x: float, what: str) -> float:
    xs = [p[0] for p in curve]
    if not xs[0] <= x <= xs[-1]:
        raise DomainError(f"{what}: {x} V outside tabulated range [{xs[0]}, {xs[-1]}]")
    return float(np.interp(x, xs, [p[1] for p in curve]))


@dataclass(frozen=True)
class VolatileResponse:
    theta: float
    resistance: float
    settle_ns: float


def volatile_response(v_in: float, params: SmtjParams = SmtjParams()) -> VolatileResponse:
    """Steady-state response of a volatile S-MTJ held at ``v_in``.

    No history enters: once the input is withdrawn the device relaxes back to
    the anti-parallel (r_off) state.
    """
    theta = _interp(params.transfer_curve, v_in, "transfer curve")
    settle = _interp(params.delay_curve, v_in, "delay curve")
    ratio = resistance_ratio(theta, params.eta1, params.eta2)
    return VolatileResponse(theta=theta, resistance=params.r_off * ratio, settle_ns=settle)


@dataclass(frozen=True)
class NonVolatileSmtjState:
    """Persistent magnetization state; ``orientation`` indexes 0..k-1.

    For binary devices index 0 is the high-resistance orientation and 1 the
    low-resistance one.
    """

    orientation: int = PSI0
    k: int = 2

    def __post_init__(self):
        if self.k < 2:
            raise DomainError("k must be at least 2")
        if not 0 <= self.orientation < self.k:
            raise DomainError(f"orientation {self.orientation} outside 0..{self.k - 1}")

    def read(self) -> int:
        # reads are non-destructive
        return self.orientation


def nonvolatile_apply(state: NonVolatileSmtjState, v_app: float,
                      params: SmtjParams = SmtjParams(), level: int | None = None) -> NonVolatileSmtjState:
    """Apply a signed write voltage to a non-volatile device.

    Positive ``v_app`` drives the set electrode pair, negative the reset pair.
    A magnitude below ``params.v_threshold`` leaves the state untouched. For
    k > 2 a positive write programs ``level`` (default the top level).
    """
    if v_app >= params.v_threshold:
        target = state.k - 1 if level is None else level
        return NonVolatileSmtjState(target, state.k)
    if v_app <= -params.v_threshold:
        return NonVolatileSmtjState(PSI0, state.k)
    return state

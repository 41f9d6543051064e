"""Spatial probability vectors: n equal-weight digits of k levels each."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .errors import DomainError, ParseError

_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class ProbabilityVector:
    digits: tuple[int, ...]
    k: int = 2

    def __post_init__(self):
        digits = tuple(int(d) for d in self.digits)
        object.__setattr__(self, "digits", digits)
        if self.k < 2:
            raise DomainError("k must be at least 2")
        if not digits:
            raise DomainError("a probability vector needs at least one digit")
        for d in digits:
            if not 0 <= d < self.k:
                raise DomainError(f"digit {d} outside 0..{self.k - 1}")

    @property
    def n(self) -> int:
        return len(self.digits)

    @property
    def levels(self) -> int:
        """Number of non-zero resolution steps, n(k-1)."""
        return self.n * (self.k - 1)

    @property
    def total(self) -> int:
        return sum(self.digits)

    @property
    def value(self) -> float:
        return decode(self)

    def __str__(self) -> str:
        return format_vector(self)

    @classmethod
    def parse(cls, text: str) -> "ProbabilityVector":
        return parse_vector(text)


def format_vector(v: ProbabilityVector) -> str:
    """Text form ``k<k>:<digits>``, e.g. ``k2:1111100000``."""
    if v.k > len(_DIGITS):
        raise DomainError(f"text form supports k <= {len(_DIGITS)}")
    return f"k{v.k}:" + "".join(_DIGITS[d] for d in v.digits)


def parse_vector(text: str) -> ProbabilityVector:
    text = text.strip()
    head, sep, body = text.partition(":")
    if not sep or not head.startswith("k") or not body:
        raise ParseError(f"malformed probability vector {text!r}")
    try:
        k = int(head[1:])
        digits = tuple(_DIGITS.index(c) for c in body.lower())
        return ProbabilityVector(digits, k)
    except (ValueError, DomainError) as exc:
        raise ParseError(f"malformed probability vector {text!r}: {exc}") from None


def decode(v: ProbabilityVector, exact: bool = False):
    """Probability held by ``v``: digit sum over n(k-1)."""
    frac = Fraction(v.total, v.levels)
    return frac if exact else float(frac)


def thermometer(total: int, n: int, k: int = 2) -> ProbabilityVector:
    """Fill digits to k-1 from the left until ``total`` is used up."""
    if not 0 <= total <= n * (k - 1):
        raise DomainError(f"digit total {total} not representable with n={n}, k={k}")
    full, rem = divmod(total, k - 1)
    digits = [k - 1] * full
    if full < n:
        digits.append(rem)
        digits.extend([0] * (n - full - 1))
    return ProbabilityVector(tuple(digits), k)


def encode(p: float, n: int, k: int = 2) -> ProbabilityVector:
    """Nearest representable vector to ``p`` in canonical thermometer order.

    The digit total is ``p * n(k-1)`` rounded half-up, computed exactly on
    the binary value of ``p``.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise DomainError(f"probability {p} outside [0, 1]")
    total = math.floor(Fraction(p) * (n * (k - 1)) + Fraction(1, 2))
    return thermometer(total, n, k)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def inject_faults(v: ProbabilityVector, m: int, rng_seed=None) -> ProbabilityVector:
    """Shift ``m`` distinct randomly chosen digits by one level.

    The direction is uniform where both neighbours exist and forced inward at
    the extremes, so every fault moves the decoded value by exactly one
    resolution step.
    """
    if not 0 <= m <= v.n:
        raise DomainError(f"cannot place {m} faults in {v.n} digits")
    if m == 0:
        return v
    rng = _rng(rng_seed)
    return shift_digits(v, rng.choice(v.n, size=m, replace=False), rng)


def shift_digits(v: ProbabilityVector, indices, rng) -> ProbabilityVector:
    """Move each listed digit one level, inward at the extremes."""
    digits = list(v.digits)
    for i in indices:
        d = digits[i]
        if d == 0:
            step = 1
        elif d == v.k - 1:
            step = -1
        else:
            step = 1 if rng.random() < 0.5 else -1
        digits[i] = d + step
    return ProbabilityVector(tuple(digits), v.k)


# Conventional radix register, kept as the contrast case for fault studies.

def radix_encode(value: int, bits: int) -> tuple[int, ...]:
    """MSB-first binary digits of ``value``."""
    if not 0 <= value < 2 ** bits:
        raise DomainError(f"{value} does not fit in {bits} bits")
    return tuple((value >> (bits - 1 - i)) & 1 for i in range(bits))


def radix_decode(bits: Iterable[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def flip_bit(bits: tuple[int, ...], index: int) -> tuple[int, ...]:
    out = list(bits)
    out[index] ^= 1
    return tuple(out)


def radix_worst_single_fault(bits: int) -> int:
    """Largest integer error a single flipped bit can cause."""
    return max(abs(radix_decode(flip_bit(radix_encode(0, bits), i))) for i in range(bits))


@dataclass(frozen=True)
class EncodingParams:
    """Digit-to-resistance map ``r = beta / (p + eps)``.

    ``beta`` and ``eps`` are pinned by requiring digit 0 to sit at ``r_off``
    and digit k-1 at ``r_on``.
    """

    r_off: float = 20.0
    r_on: float = 1.0
    k: int = 2

    def __post_init__(self):
        if not self.r_off > self.r_on > 0:
            raise DomainError("require r_off > r_on > 0")
        if self.k < 2:
            raise DomainError("k must be at least 2")

    @property
    def eps(self) -> float:
        return (self.k - 1) / (self.r_off / self.r_on - 1.0)

    @property
    def beta(self) -> float:
        return self.eps * self.r_off

    @classmethod
    def from_eps(cls, eps: float, r_on: float = 1.0, k: int = 2) -> "EncodingParams":
        """Parameters whose offset equals ``eps`` for the given ``r_on``."""
        if eps <= 0:
            raise DomainError("eps must be positive")
        return cls(r_off=r_on * ((k - 1) / eps + 1.0), r_on=r_on, k=k)

    @classmethod
    def from_beta_eps(cls, beta: float, eps: float, k: int = 2) -> "EncodingParams":
        """Parameters with the given ``beta`` and ``eps``."""
        if beta <= 0 or eps <= 0:
            raise DomainError("beta and eps must be positive")
        return cls(r_off=beta / eps, r_on=beta / (k - 1 + eps), k=k)

    @classmethod
    def from_device(cls, device, k: int = 2) -> "EncodingParams":
        return cls(r_off=device.r_off, r_on=device.r_on, k=k)


def digit_resistance(p_i: int, params: EncodingParams = EncodingParams()) -> float:
    if not 0 <= p_i < params.k:
        raise DomainError(f"digit {p_i} outside 0..{params.k - 1}")
    return params.beta / (p_i + params.eps)

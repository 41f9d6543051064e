"""Flash-style decomposer: a comparator ladder back to thermometer digits."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..encoding import ProbabilityVector, thermometer
from ..errors import CalibrationError, DomainError


@dataclass(frozen=True)
class DecomposerLadder:
    """Ascending trigger voltages, one per decomposer element.

    There are n(k-1) elements for an n-digit, k-level output.
    """

    thresholds: tuple[float, ...]
    v_ref: float = 1.0
    k: int = 2

    def __post_init__(self):
        t = tuple(float(x) for x in self.thresholds)
        object.__setattr__(self, "thresholds", t)
        if not t:
            raise CalibrationError("a ladder needs at least one element")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise CalibrationError("ladder thresholds must be strictly ascending")
        if len(t) % (self.k - 1):
            raise CalibrationError(f"{len(t)} elements do not fill digits of k={self.k}")

    @property
    def n(self) -> int:
        return len(self.thresholds) // (self.k - 1)

    def count(self, v_in: float) -> int:
        """Number of elements whose threshold is at or below ``v_in``."""
        return bisect_right(self.thresholds, v_in)

    def count_many(self, v_in) -> np.ndarray:
        return np.searchsorted(np.asarray(self.thresholds), np.asarray(v_in, dtype=float), side="right")


def decomposer_element(v_in: float, v_ctl: float, v_th: float = 0.0,
                       v_ref: float = 1.0) -> tuple[float, float, int]:
    """One element: (out1, out2, digit) for the applied difference ``v_in - v_ctl``."""
    if v_in - v_ctl >= v_th:
        return v_ref / 3.0, 0.0, 1
    return 0.0, v_ref / 3.0, 0


def element_outputs(v_in: float, ladder: DecomposerLadder) -> list[tuple[float, float]]:
    return [decomposer_element(v_in, t, 0.0, ladder.v_ref)[:2] for t in ladder.thresholds]


def decompose(v_in: float, ladder: DecomposerLadder) -> ProbabilityVector:
    """Thermometer vector with one unit per triggered element."""
    if not np.isfinite(v_in):
        raise DomainError("decomposer input must be finite")
    return thermometer(ladder.count(v_in), ladder.n, ladder.k)


def calibrate_ladder(levels: Sequence[float], v_ref: float = 1.0, k: int = 2) -> DecomposerLadder:
    """Thresholds at midpoints between consecutive achievable output levels."""
    lv = [float(x) for x in levels]
    if len(lv) < 2:
        raise CalibrationError("need at least two output levels")
    if any(b <= a for a, b in zip(lv, lv[1:])):
        raise CalibrationError("output levels must be strictly ascending")
    if (len(lv) - 1) % (k - 1):
        raise CalibrationError(f"{len(lv)} levels do not match digits of k={k}")
    mids = tuple(0.5 * (a + b) for a, b in zip(lv, lv[1:]))
    return DecomposerLadder(mids, v_ref, k)

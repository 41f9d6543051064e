"""Ladder calibration for stages whose analog output is not a function of
the value being decoded (multipliers read out through a non-linear stage 1).

A ladder can only realise a monotone map from analog value to output level,
so calibration picks, among all monotone level assignments of the achievable
analog values, the one with the smallest worst-case error against the target
values; ties are broken by the smallest total squared error and then by the
smallest sum of levels, which makes the choice unique in practice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CalibrationError
from .decomposer import DecomposerLadder

GROUP_RTOL = 1e-12
SSE_RTOL = 1e-9
WORST_ATOL = 1e-12


@dataclass(frozen=True)
class MinimaxFit:
    ladder: DecomposerLadder
    worst_error: float
    sse: float
    group_values: np.ndarray   # distinct analog values, ascending
    group_levels: np.ndarray   # assigned output level per group


def group_analog(analog, targets, rtol: float = GROUP_RTOL):
    """Sort by analog value and merge values equal to relative ``rtol``.

    Returns (representative values, list of target arrays per group, group
    index of every input sample).
    """
    analog = np.asarray(analog, dtype=float)
    targets = np.asarray(targets, dtype=float)
    order = np.argsort(analog, kind="stable")
    a = analog[order]
    scale = max(np.max(np.abs(a)), 1e-300)
    breaks = np.flatnonzero(np.diff(a) > rtol * scale) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [len(a)]))
    values = a[starts]
    groups = [targets[order[s:e]] for s, e in zip(starts, ends)]
    member = np.empty(len(a), dtype=int)
    for g, (s, e) in enumerate(zip(starts, ends)):
        member[order[s:e]] = g
    return values, groups, member


def _error_tables(groups, levels: int):
    grid = np.arange(levels + 1) / levels
    worst = np.empty((len(groups), levels + 1))
    sse = np.empty_like(worst)
    for g, t in enumerate(groups):
        diff = grid[None, :] - t[:, None]
        worst[g] = np.abs(diff).max(axis=0)
        sse[g] = (diff ** 2).sum(axis=0)
    return worst, sse


def _within(worst, bound):
    # errors equal up to rounding (e.g. a target midway between two levels) tie
    return worst <= bound + WORST_ATOL * max(1.0, abs(bound))


def _feasible(worst, bound) -> bool:
    level = 0
    for row in worst:
        ok = np.flatnonzero(_within(row[level:], bound))
        if ok.size == 0:
            return False
        level += ok[0]
    return True


def optimal_assignment(worst, sse, rtol: float = SSE_RTOL):
    """Monotone levels minimising max error, then summed squared error, then
    the sum of assigned levels (squared errors within ``rtol`` count as tied).
    """
    candidates = np.unique(worst)
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(worst, candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    bound = candidates[lo]
    cost = np.where(_within(worst, bound), sse, np.inf)
    ngroups, nlev = cost.shape
    tol = rtol * max(float(np.max(sse[np.isfinite(cost)], initial=0.0)), 1e-300) * ngroups
    levels_idx = np.arange(nlev)
    best = cost[0].copy()
    best_sum = levels_idx.astype(float).copy()
    back = np.zeros((ngroups, nlev), dtype=int)
    for g in range(1, ngroups):
        # lexicographic prefix minimum over levels <= m of the previous row
        arg = np.zeros(nlev, dtype=int)
        for m in range(1, nlev):
            j = arg[m - 1]
            if _better(best[m], best_sum[m], best[j], best_sum[j], tol):
                arg[m] = m
            else:
                arg[m] = j
        best, best_sum = cost[g] + best[arg], levels_idx + best_sum[arg]
        back[g] = arg
    final = 0
    for m in range(1, nlev):
        if _better(best[m], best_sum[m], best[final], best_sum[final], tol):
            final = m
    levels = np.empty(ngroups, dtype=int)
    levels[-1] = final
    for g in range(ngroups - 1, 0, -1):
        levels[g - 1] = back[g, levels[g]]
    achieved = float(max(worst[g, lv] for g, lv in enumerate(levels)))
    return levels, achieved, float(best[final])


def _better(c1, s1, c2, s2, tol) -> bool:
    if not np.isfinite(c1):
        return False
    if not np.isfinite(c2):
        return True
    if c1 < c2 - tol:
        return True
    return abs(c1 - c2) <= tol and s1 < s2


def thresholds_for_assignment(values, levels, n_levels: int) -> tuple[float, ...]:
    """Place n_levels ascending thresholds realising the given monotone map."""
    values = np.asarray(values, dtype=float)
    span = float(values[-1] - values[0]) if len(values) > 1 else abs(float(values[0]))
    step = (span if span > 0 else 1.0) / (4.0 * n_levels)
    out = []
    first = int(levels[0])
    for j in range(first):
        out.append(values[0] - step * (first - j))
    for g in range(1, len(values)):
        lo, hi = int(levels[g - 1]), int(levels[g])
        gap = values[g] - values[g - 1]
        for j in range(1, hi - lo + 1):
            out.append(values[g - 1] + gap * j / (hi - lo + 1))
    last = int(levels[-1])
    for j in range(1, n_levels - last + 1):
        out.append(values[-1] + step * j)
    return tuple(float(x) for x in out)


def calibrate_minimax(analog, targets, n: int, k: int = 2, v_ref: float = 1.0) -> MinimaxFit:
    """Brute-force-optimal ladder for decoding ``targets`` from ``analog``."""
    analog = np.asarray(analog, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if analog.shape != targets.shape or analog.size == 0:
        raise CalibrationError("analog and target samples must be non-empty and aligned")
    n_levels = n * (k - 1)
    values, groups, _ = group_analog(analog, targets)
    worst, sse = _error_tables(groups, n_levels)
    levels, bound, total = optimal_assignment(worst, sse)
    ladder = DecomposerLadder(thresholds_for_assignment(values, levels, n_levels), v_ref, k)
    return MinimaxFit(ladder, bound, total, values, levels)


def calibrate_monotone(transfer, n: int, k: int = 2, v_ref: float = 1.0) -> DecomposerLadder:
    """Ladder for a stage whose output is ``transfer(value)``, increasing.

    Thresholds sit at the images of the midpoints between output levels, so
    decoding rounds the value half-up to the nearest level.
    """
    n_levels = n * (k - 1)
    mids = (np.arange(n_levels) + 0.5) / n_levels
    return DecomposerLadder(tuple(float(transfer(x)) for x in mids), v_ref, k)

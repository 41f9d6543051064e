"""Fault-injection campaigns on the CPT vectors stored in composer hardware.

Each trial shifts m distinct digits, drawn from every stored CPT digit of
the network, by one level and reruns composer inference. Trial t draws from
its own generator seeded by (seed, t), so results do not depend on how
trials are spread over worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bayes.network import BayesNet
from .bayes.pearl import BP_CONFIG, ComposerArithmetic, bp_infer, linf_gap, store_cpt
from .encoding import radix_worst_single_fault, shift_digits
from .errors import DomainError, InconsistentEvidenceError
from .framework import CircuitConfig


@dataclass(frozen=True)
class TrialResult:
    trial: int
    faults: int
    belief_shift: float   # nan when the faulted run failed
    stored_shift: float   # largest decoded change of any stored vector
    vectors_hit: int


@dataclass(frozen=True)
class FaultReport:
    m: int
    trials: tuple
    seed: int
    n: int
    k: int
    pool_digits: int

    @property
    def completed(self):
        return [t for t in self.trials if not math.isnan(t.belief_shift)]

    @property
    def failed(self) -> int:
        return len(self.trials) - len(self.completed)

    @property
    def mean_belief_shift(self) -> float:
        done = self.completed
        return math.fsum(t.belief_shift for t in done) / len(done) if done else math.nan

    @property
    def max_belief_shift(self) -> float:
        return max((t.belief_shift for t in self.completed), default=math.nan)

    @property
    def max_stored_shift(self) -> float:
        return max((t.stored_shift for t in self.trials), default=0.0)


def stored_tables(net: BayesNet, config: CircuitConfig) -> dict:
    return {x: store_cpt(net[x].cpt, config) for x in net.nodes}


def fault_tables(tables: dict, m: int, rng):
    """Copy of ``tables`` with m digit faults spread over all stored digits.

    Returns (faulted tables, largest decoded shift of a vector, vectors hit).
    """
    sites = [(x, idx) for x, t in tables.items() for idx in np.ndindex(t.shape)]
    if not sites:
        if m:
            raise DomainError("no stored digits to fault")
        return tables, 0.0, 0
    n = tables[sites[0][0]][sites[0][1]].n
    pool = len(sites) * n
    if not 0 <= m <= pool:
        raise DomainError(f"cannot place {m} faults in {pool} stored digits")
    picks = np.sort(rng.choice(pool, size=m, replace=False)) if m else np.array([], dtype=int)
    by_vector: dict[int, list[int]] = {}
    for p in picks:
        by_vector.setdefault(int(p) // n, []).append(int(p) % n)
    out = {x: t.copy() for x, t in tables.items()}
    shift = 0.0
    for site, digits in by_vector.items():
        x, idx = sites[site]
        old = out[x][idx]
        new = shift_digits(old, digits, rng)
        out[x][idx] = new
        shift = max(shift, abs(new.total - old.total) / new.levels)
    return out, shift, len(by_vector)


def _beliefs(net, tables, config, evidence):
    arith = ComposerArithmetic(config, stored=tables)
    return bp_infer(net, evidence, backend=arith).beliefs


def _run_trial(args) -> TrialResult:
    net, tables, reference, config, evidence, m, seed, trial = args
    rng = np.random.default_rng([seed, trial])
    faulted, stored_shift, hit = fault_tables(tables, m, rng)
    try:
        shift = linf_gap(_beliefs(net, faulted, config, evidence), reference)
    except InconsistentEvidenceError:
        shift = math.nan
    return TrialResult(trial, m, shift, stored_shift, hit)


def run_campaign(net: BayesNet, m: int, trials: int, seed: int = 0,
                 config: CircuitConfig = BP_CONFIG, evidence=None, workers: int = 1) -> FaultReport:
    """Belief shift caused by m stored-digit faults, over seeded trials."""
    if trials < 0:
        raise DomainError("trial count must be non-negative")
    tables = stored_tables(net, config)
    pool = sum(t.size for t in tables.values()) * config.n
    reference = _beliefs(net, tables, config, evidence)
    jobs = [(net, tables, reference, config, evidence, m, seed, t) for t in range(trials)]
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]
    return FaultReport(m, tuple(results), seed, config.n, config.k, pool)


def _g(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.12g}"


def format_fault_report(report: FaultReport, per_trial: bool = True) -> str:
    n, k = report.n, report.k
    lines = [f"faults m={report.m} trials={len(report.trials)} seed={report.seed} n={n} k={k}",
             f"stored_digits {report.pool_digits}"]
    if per_trial:
        lines.append("trial,belief_shift,stored_shift,vectors_hit")
        lines += [f"{t.trial},{_g(t.belief_shift)},{_g(t.stored_shift)},{t.vectors_hit}"
                  for t in report.trials]
    resolution = 1.0 / (n * (k - 1))
    worst = radix_worst_single_fault(n)
    lines += [
        f"mean_belief_shift {_g(report.mean_belief_shift)}",
        f"max_belief_shift {_g(report.max_belief_shift)}",
        f"max_stored_shift {_g(report.max_stored_shift)}",
        f"failed_trials {report.failed}",
        f"spatial_single_fault_bound {_g(resolution)}",
        f"radix_single_fault_worst {worst}/{2 ** n - 1} = {_g(worst / (2 ** n - 1))}",
    ]
    return "\n".join(lines) + "\n"

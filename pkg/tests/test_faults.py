import math

import numpy as np
import pytest

from pacsim.bayes import fork_polytree, parse_bn
from pacsim.bayes.pearl import BP_CONFIG
from pacsim.errors import DomainError
from pacsim.faults import fault_tables, format_fault_report, run_campaign, stored_tables

CHAIN_BN = "node A states=2 prior=0.5,0.5\nnode X states=2 parents=A cpt=0.9,0.1;0.3,0.7\n"


def test_no_faults_no_shift():
    report = run_campaign(fork_polytree(0), 0, 5, seed=1)
    assert all(t.belief_shift == 0.0 and t.stored_shift == 0.0 for t in report.trials)
    assert report.mean_belief_shift == 0.0 and report.failed == 0


def test_single_fault_moves_one_stored_vector_by_one_step():
    tables = stored_tables(parse_bn(CHAIN_BN), BP_CONFIG)
    for seed in range(20):
        faulted, shift, hit = fault_tables(tables, 1, np.random.default_rng(seed))
        assert shift == pytest.approx(0.1, abs=1e-15) and hit == 1
        changed = [(x, idx) for x in tables for idx in np.ndindex(tables[x].shape)
                   if faulted[x][idx] != tables[x][idx]]
        assert len(changed) == 1


def test_fault_count_limits():
    tables = stored_tables(parse_bn(CHAIN_BN), BP_CONFIG)
    with pytest.raises(DomainError):
        fault_tables(tables, 6 * 10 + 1, np.random.default_rng(0))
    with pytest.raises(DomainError):
        run_campaign(parse_bn(CHAIN_BN), 1, -1)


@pytest.mark.parametrize("evidence", [None, {"Y": 1}])
def test_mean_shift_grows_with_fault_count(evidence):
    net = fork_polytree(0)
    means = [run_campaign(net, m, 40, seed=3, evidence=evidence).mean_belief_shift for m in range(1, 6)]
    assert all(b >= a for a, b in zip(means, means[1:]))
    assert means[0] > 0


def test_campaign_is_independent_of_worker_count():
    net = fork_polytree(4)
    one = run_campaign(net, 2, 6, seed=9, evidence={"Z": 0})
    many = run_campaign(net, 2, 6, seed=9, evidence={"Z": 0}, workers=2)
    assert format_fault_report(one) == format_fault_report(many)
    assert format_fault_report(one) == format_fault_report(run_campaign(net, 2, 6, seed=9, evidence={"Z": 0}))


def test_report_lines():
    text = format_fault_report(run_campaign(parse_bn(CHAIN_BN), 1, 3, seed=0))
    lines = text.splitlines()
    assert lines[0] == "faults m=1 trials=3 seed=0 n=10 k=2"
    assert "stored_digits 60" in lines
    assert "spatial_single_fault_bound 0.1" in lines
    assert lines[-1] == f"radix_single_fault_worst 512/1023 = {512 / 1023:.12g}"
    assert sum(1 for line in lines if line[:1].isdigit()) == 3


def test_empty_campaign():
    report = run_campaign(parse_bn(CHAIN_BN), 1, 0)
    assert math.isnan(report.mean_belief_shift) and report.failed == 0
    assert "mean_belief_shift nan" in format_fault_report(report)

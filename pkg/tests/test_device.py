import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from pacsim.device import (PSI0, PSI1, NonVolatileSmtjState, SmtjParams, nonvolatile_apply, resistance_ratio,
                           volatile_response)
from pacsim.errors import DomainError


@pytest.mark.parametrize("theta, expected", [(0.0, 1.0), (90.0, 0.51), (60.0, 0.51 / 0.755)])
def test_resistance_ratio_examples(theta, expected):
    assert resistance_ratio(theta, 0.7, 0.7) == pytest.approx(expected, abs=1e-12)


def test_resistance_ratio_rejects_efficiency_at_one():
    with pytest.raises(DomainError):
        resistance_ratio(45.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        resistance_ratio(200.0)


@given(st.floats(0.0, 90.0), st.floats(0.0, 90.0), st.floats(0.05, 0.99), st.floats(0.05, 0.99))
def test_resistance_ratio_decreasing_in_angle(t1, t2, e1, e2):
    lo, hi = sorted((t1, t2))
    r_lo, r_hi = resistance_ratio(lo, e1, e2), resistance_ratio(hi, e1, e2)
    assert 0.0 < r_hi <= r_lo <= 1.0
    if hi - lo > 1e-6:
        assert r_hi < r_lo
    assert r_lo == pytest.approx(oracles.tmr_ratio(lo, e1, e2), rel=1e-12)


def test_volatile_response_endpoints():
    p = SmtjParams(r_off=2.0, r_on=1.02)
    rest = volatile_response(0.0, p)
    assert rest.theta == 0.0 and rest.resistance == 2.0
    top = volatile_response(p.transfer_curve[-1][0], p)
    assert top.theta == 90.0
    assert top.resistance == pytest.approx(0.51 * 2.0, rel=1e-12)
    assert top.settle_ns == 44.0


def test_volatile_response_interpolates_between_knots():
    p = SmtjParams(transfer_curve=((0.0, 0.0), (1.0, 30.0), (2.0, 90.0)),
                   delay_curve=((0.0, 40.0), (2.0, 60.0)))
    r = volatile_response(1.5, p)
    assert r.theta == pytest.approx(60.0) and r.settle_ns == pytest.approx(55.0)
    with pytest.raises(DomainError):
        volatile_response(2.5, p)


def test_params_validation():
    with pytest.raises(DomainError):
        SmtjParams(r_off=1.0, r_on=2.0)
    with pytest.raises(DomainError):
        SmtjParams(transfer_curve=((0.0, 10.0), (1.0, 5.0)))
    with pytest.raises(DomainError):
        SmtjParams(transfer_curve=((0.0, 0.0), (1.0, 120.0)))


def test_nonvolatile_state_machine():
    p = SmtjParams(v_threshold=0.5)
    s0 = NonVolatileSmtjState(PSI0)
    assert nonvolatile_apply(s0, 0.0, p) == s0
    assert nonvolatile_apply(s0, 0.5, p).orientation == PSI1
    assert nonvolatile_apply(NonVolatileSmtjState(PSI1), -0.7, p).orientation == PSI0
    # enumerate every (state, input class) pair
    for state in (PSI0, PSI1):
        s = NonVolatileSmtjState(state)
        assert nonvolatile_apply(s, 0.49, p).orientation == state
        assert nonvolatile_apply(s, -0.49, p).orientation == state
        assert nonvolatile_apply(s, 1.0, p).orientation == PSI1
        assert nonvolatile_apply(s, -1.0, p).orientation == PSI0


@given(st.integers(0, 1), st.floats(-3.0, 3.0))
def test_nonvolatile_apply_idempotent(state, v):
    p = SmtjParams()
    once = nonvolatile_apply(NonVolatileSmtjState(state), v, p)
    assert nonvolatile_apply(once, v, p) == once


@given(st.integers(0, 3), st.lists(st.floats(-0.4999, 0.4999), max_size=30))
def test_subthreshold_sequences_never_switch(state, inputs):
    p = SmtjParams(v_threshold=0.5)
    s = NonVolatileSmtjState(state, k=4)
    for v in inputs:
        s = nonvolatile_apply(s, v, p)
    assert s.read() == state


@given(st.lists(st.floats(0.0, 1.0), max_size=10))
def test_volatile_device_forgets_history(history):
    p = SmtjParams()
    for v in history:
        volatile_response(v, p)
    assert volatile_response(0.0, p).resistance == p.r_off
    assert math.isclose(volatile_response(0.0, p).theta, 0.0)

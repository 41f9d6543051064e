import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pacsim.encoding import (EncodingParams, ProbabilityVector, decode, digit_resistance, encode, flip_bit,
                             inject_faults, parse_vector, radix_decode, radix_encode, radix_worst_single_fault,
                             thermometer)
from pacsim.errors import DomainError, ParseError


def vectors(max_n=12, max_k=5):
    return st.integers(2, max_k).flatmap(
        lambda k: st.lists(st.integers(0, k - 1), min_size=1, max_size=max_n).map(
            lambda d: ProbabilityVector(tuple(d), k)))


def test_decode_examples():
    assert decode(ProbabilityVector((1,) * 5 + (0,) * 5)) == 0.5
    assert decode(ProbabilityVector((0,) * 10)) == 0.0
    assert decode(ProbabilityVector((3, 3, 3, 3), 4)) == 1.0
    assert decode(ProbabilityVector((2, 1, 0), 3), exact=True) == Fraction(1, 2)


def test_encode_examples():
    assert encode(0.5, 10).digits == (1, 1, 1, 1, 1, 0, 0, 0, 0, 0)
    v = encode(0.34, 10)
    assert v.total == 3 and decode(v) == 0.3
    assert abs(decode(v) - 0.34) <= 0.05
    assert encode(1.0, 4, 4).digits == (3, 3, 3, 3)
    assert encode(0.45, 10).total == 5        # half-up on the exact binary value of 0.45 (4.5000000000000004)
    assert encode(0.25, 2).total == 1         # exact midpoint rounds up
    assert thermometer(5, 3, 3).digits == (2, 2, 1)


@pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
def test_encode_rejects_out_of_range(p):
    with pytest.raises(DomainError):
        encode(p, 10)


def test_vector_validation_and_text_form():
    with pytest.raises(DomainError):
        ProbabilityVector((0, 2), 2)
    with pytest.raises(DomainError):
        ProbabilityVector((), 2)
    v = parse_vector("k2:1111100000")
    assert v.total == 5 and str(v) == "k2:1111100000"
    assert str(ProbabilityVector((3, 0, 2), 4)) == "k4:302"
    for bad in ("1111", "k2:", "k2:1121", "kx:11"):
        with pytest.raises(ParseError):
            parse_vector(bad)


@given(vectors())
def test_text_form_round_trip(v):
    assert parse_vector(str(v)) == v


@given(vectors(), st.randoms())
def test_decode_permutation_invariant(v, rnd):
    digits = list(v.digits)
    rnd.shuffle(digits)
    assert decode(ProbabilityVector(tuple(digits), v.k), exact=True) == decode(v, exact=True)
    assert 0 <= decode(v) <= 1


@given(st.integers(1, 30), st.integers(2, 6), st.data())
def test_encode_decode_identity_on_representable_values(n, k, data):
    total = data.draw(st.integers(0, n * (k - 1)))
    v = encode(total / (n * (k - 1)), n, k)
    assert v.total == total
    assert v == thermometer(total, n, k)


@given(st.floats(0.0, 1.0), st.integers(1, 40), st.integers(2, 5))
def test_encode_error_bound(p, n, k):
    err = abs(decode(encode(p, n, k), exact=True) - Fraction(p))
    assert err <= Fraction(1, 2 * n * (k - 1))


def test_digit_resistance_examples():
    params = EncodingParams(r_off=2.0, r_on=1.0)
    assert params.eps == 1.0 and params.beta == 2.0
    assert digit_resistance(0, params) == 2.0
    assert digit_resistance(1, params) == 1.0
    huge = EncodingParams(r_off=1e12, r_on=1.0)
    assert huge.eps < 1e-11 and digit_resistance(0, huge) == pytest.approx(1e12)
    with pytest.raises(DomainError):
        digit_resistance(2, params)


def test_default_params_and_constructors():
    p = EncodingParams()
    assert p.eps == pytest.approx(1 / 19) and p.beta == pytest.approx(20 / 19)
    q = EncodingParams.from_beta_eps(2.0, 0.05)
    assert q.beta == pytest.approx(2.0) and q.eps == pytest.approx(0.05)
    assert EncodingParams.from_eps(0.05).eps == pytest.approx(0.05)


@given(st.floats(1.5, 1e4), st.floats(0.1, 10.0), st.integers(2, 6))
def test_resistance_endpoints_and_monotonicity(ratio, r_on, k):
    params = EncodingParams(r_off=ratio * r_on, r_on=r_on, k=k)
    rs = [digit_resistance(d, params) for d in range(k)]
    assert rs[0] == pytest.approx(params.r_off, rel=1e-9)
    assert rs[-1] == pytest.approx(params.r_on, rel=1e-9)
    assert all(b < a for a, b in zip(rs, rs[1:]))


def test_inject_faults_examples():
    v = encode(0.5, 10)
    assert inject_faults(v, 0, 1) == v
    for seed in range(30):
        assert abs(decode(inject_faults(v, 1, seed)) - 0.5) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(DomainError):
        inject_faults(v, 11, 0)


def test_inject_faults_deterministic_per_seed():
    v = encode(0.37, 20, 3)
    assert inject_faults(v, 4, 9) == inject_faults(v, 4, 9)


@pytest.mark.parametrize("n, k", [(3, 2), (4, 3), (5, 2), (6, 2)])
def test_fault_error_bound_exhaustive(n, k):
    """Every placement of m faults on every vector moves the value by at most m steps."""
    rng = np.random.default_rng(0)
    step = Fraction(1, n * (k - 1))
    for digits in itertools.product(range(k), repeat=n):
        v = ProbabilityVector(digits, k)
        for m in range(n + 1):
            faulty = inject_faults(v, m, rng)
            assert sum(a != b for a, b in zip(faulty.digits, v.digits)) == m
            assert abs(decode(faulty, exact=True) - decode(v, exact=True)) <= m * step


@given(vectors(), st.integers(0, 2 ** 32 - 1))
def test_single_fault_is_exactly_one_step(v, seed):
    faulty = inject_faults(v, 1, seed)
    assert abs(decode(faulty, exact=True) - decode(v, exact=True)) == Fraction(1, v.levels)


def test_radix_contrast():
    assert radix_encode(5, 4) == (0, 1, 0, 1)
    assert radix_decode((0, 1, 0, 1)) == 5
    assert radix_worst_single_fault(10) == 512
    for value in (0, 300, 1023):
        bits = radix_encode(value, 10)
        assert abs(radix_decode(flip_bit(bits, 0)) - value) == 512


@given(st.integers(1, 24), st.data())
def test_radix_msb_flip_is_half_range(bits, data):
    value = data.draw(st.integers(0, 2 ** bits - 1))
    assert abs(radix_decode(flip_bit(radix_encode(value, bits), 0)) - value) == 2 ** (bits - 1)

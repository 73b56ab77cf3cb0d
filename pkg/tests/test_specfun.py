from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import kv

from scalewave.specfun import (
    DomainError,
    HypergeometricParams,
    PoleError,
    bessel_k,
    bessel_k_derivative,
    bessel_k_scaled,
    bessel_k_second_derivative,
    hyp2f1,
    hyp2f1_series,
    pochhammer,
)

# K_order(t) to 22 digits, computed offline with mpmath at 35 digits
K_ORACLE = [
    (0.0, 1.0, 0.4210244382407083333356),
    (1.0, 1.0, 0.6019072301972345747375),
    (2.5, 50.0, 3.627839645299047603e-23),
    (1.0, 2.0, 0.1398658818165224272846),
    (2.0, 2.0, 0.2537597545660558629373),
    (0.3, 0.05, 3.811966336769110841033),
    (10.0, 0.05, 1.902404178984806404e21),
    (10.0, 100.0, 7.655427977388100611e-45),
    (3.7, 7.5, 5.810088489051306543582e-4),
    (0.0, 3.0, 0.03473950438627924807235),
    (1.0, 3.0, 0.04015643112819418437671),
]

# 2F1(a, b; c; z), same provenance
HYP_ORACLE = [
    ((0.5, 1.5, 2.5, 0.3), 1.108062551056931988447),
    ((1.7, 0.9, 2.5, 0.85), 2.718749888202382402606),
    ((-0.7, 2.0, 3.2, 0.6), 0.7158086708637381398354),
    ((1.2, 1.1, 1.5, 0.99), 46.53632945761987297357),
    ((0.3, 0.4, 1.5, 0.999), 1.178847770278759938859),
]


@pytest.mark.parametrize("order,t,expected", K_ORACLE)
def test_bessel_k_matches_oracle(order, t, expected):
    assert bessel_k(order, t) == pytest.approx(expected, rel=1e-12)


def test_half_integer_closed_form():
    for t in (0.1, 1.0, 7.0, 30.0):
        assert bessel_k(0.5, t) == pytest.approx(math.sqrt(math.pi / (2 * t)) * math.exp(-t), rel=1e-13)


def test_scaled_is_exp_times_value():
    for order, t in ((0.0, 0.2), (2.0, 5.0), (4.5, 80.0)):
        assert bessel_k_scaled(order, t) == pytest.approx(math.exp(t) * bessel_k(order, t), rel=1e-13)


def test_scaled_survives_large_argument():
    # K itself underflows near t = 745 but the scaled value stays representable
    val = bessel_k_scaled(1.0, 2000.0)
    assert val == pytest.approx(math.sqrt(math.pi / 4000.0) * (1 + 3 / 16000.0), rel=1e-6)


def test_order_symmetry():
    assert bessel_k(-1.3, 2.0) == bessel_k(1.3, 2.0)


def test_bessel_domain():
    with pytest.raises(DomainError):
        bessel_k(1.0, 0.0)
    with pytest.raises(DomainError):
        bessel_k(1.0, -2.0)
    with pytest.raises(DomainError):
        bessel_k(math.nan, 1.0)


@settings(max_examples=60, deadline=None)
@given(order=st.floats(0.0, 8.0, allow_subnormal=False), t=st.floats(0.05, 60.0))
def test_against_scipy(order, t):
    assert bessel_k(order, t) == pytest.approx(kv(order, t), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(order=st.floats(0.0, 6.0), t=st.floats(0.1, 40.0))
def test_recurrence_derivative_solves_ode(order, t):
    k0, k1, k2 = bessel_k(order, t), bessel_k_derivative(order, t), bessel_k_second_derivative(order, t)
    terms = (t * t * k2, t * k1, -(t * t + order * order) * k0)
    assert abs(sum(terms)) <= 1e-10 * sum(abs(x) for x in terms)


@settings(max_examples=40, deadline=None)
@given(order=st.floats(0.0, 5.0), t=st.floats(0.1, 30.0))
def test_decreasing_and_positive(order, t):
    assert bessel_k(order, t) > 0
    assert bessel_k_derivative(order, t) < 0


def test_pochhammer():
    assert pochhammer(3.0, 0) == 1.0
    assert pochhammer(1.0, 5) == 120.0
    assert pochhammer(0.5, 3) == pytest.approx(0.5 * 1.5 * 2.5)
    assert pochhammer(-2.0, 4) == 0.0
    with pytest.raises(DomainError):
        pochhammer(1.0, -1)


@pytest.mark.parametrize("args,expected", HYP_ORACLE)
def test_hyp2f1_matches_oracle(args, expected):
    assert hyp2f1(*args) == pytest.approx(expected, rel=1e-10)


def test_hyp2f1_elementary_cases():
    z = np.linspace(0.0, 0.95, 20)
    np.testing.assert_allclose(hyp2f1(1.0, 1.0, 2.0, z[1:]), -np.log1p(-z[1:]) / z[1:], rtol=1e-12)
    np.testing.assert_allclose(hyp2f1(0.5, 1.0, 1.5, z[1:]), np.arctanh(np.sqrt(z[1:])) / np.sqrt(z[1:]), rtol=1e-12)
    assert hyp2f1(-3.0, 2.0, 1.5, 0.4) == pytest.approx(
        sum(pochhammer(-3.0, k) * pochhammer(2.0, k) / pochhammer(1.5, k) * 0.4**k / math.factorial(k) for k in range(4))
    )


def test_hyp2f1_scalar_and_array_agree():
    z = np.array([0.0, 0.2, 0.7])
    arr = hyp2f1(0.4, 1.3, 2.1, z)
    assert arr.shape == (3,)
    assert [hyp2f1(0.4, 1.3, 2.1, float(x)) for x in z] == pytest.approx(list(arr), rel=1e-15)
    assert isinstance(hyp2f1(0.4, 1.3, 2.1, 0.2), float)


def test_hyp2f1_errors():
    with pytest.raises(PoleError):
        hyp2f1(1.0, 1.0, -2.0, 0.3)
    with pytest.raises(PoleError):
        HypergeometricParams(1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        hyp2f1(1.0, 1.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        hyp2f1(1.0, 1.0, 2.0, -0.1)


def test_degraded_flag():
    assert not hyp2f1_series(0.5, 0.5, 3.0, 0.5).degraded
    assert hyp2f1_series(1.2, 1.1, 1.5, 0.99).degraded  # slowly convergent corner
    capped = hyp2f1_series(0.5, 0.5, 1.0, 0.999, max_terms=50)
    assert capped.degraded and capped.terms == 50


def test_excess():
    assert HypergeometricParams(0.3, 0.4, 1.5).excess == pytest.approx(0.8)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-2.0, 3.0), c=st.floats(0.2, 4.0), z=st.floats(0.0, 0.9))
def test_binomial_identity(a, c, z):
    assert hyp2f1(a, c, c, z) == pytest.approx((1 - z) ** (-a), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.1, 3.0), b=st.floats(0.1, 3.0), c=st.floats(0.3, 4.0), z=st.floats(0.0, 0.8))
def test_symmetric_in_a_b(a, b, c, z):
    assert hyp2f1(a, b, c, z) == pytest.approx(hyp2f1(b, a, c, z), rel=1e-12)

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import i0

from scalewave.specfun import DomainError
from scalewave.testfunc import (
    CutoffSpec,
    LightConeQuadratureError,
    SelfSimilarParams,
    TimeFactor,
    V_weight,
    V_weight_dt,
    adjoint_product_solution,
    adjoint_residual_fd,
    cutoff,
    cutoff_bound_constant,
    lambda_factor,
    lambda_second_derivative,
    source_integral_growth,
    source_integral,
    phi_beta,
    phi_beta_adjoint_residual,
    phi_beta_dt,
    phi_yz,
    sphere_area,
)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_phi_closed_forms():
    r = np.array([0.0, 0.3, 2.0, 15.0, 60.0])
    np.testing.assert_allclose(phi_yz(1, r), 2 * np.cosh(r), rtol=1e-14)
    np.testing.assert_allclose(phi_yz(2, r), 2 * math.pi * i0(r), rtol=1e-12)
    with np.errstate(invalid="ignore", divide="ignore"):
        sinhc = np.where(r > 0, np.sinh(r) / np.where(r > 0, r, 1), 1.0)
    np.testing.assert_allclose(phi_yz(3, r), 4 * math.pi * sinhc, rtol=1e-12)


def test_phi_errors():
    with pytest.raises(DomainError):
        phi_yz(0, 1.0)
    with pytest.raises(DomainError):
        phi_yz(2, -1.0)


def test_lambda_half_integer_case():
    lam, _ = lambda_factor(TimeFactor(0.0, 0.0), 0.0)
    assert lam == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-13)


def test_lambda_ode_example():
    tf = TimeFactor(2.0, 0.25)
    t = 1.7
    s = 1 + t
    lam, d1 = lambda_factor(tf, t)
    d2 = lambda_second_derivative(tf, t)
    res = d2 - 2.0 / s * d1 + ((2.0 + 0.25) / s**2 - 1.0) * lam
    assert abs(res) / abs(d2) <= 1e-6


def test_lambda_derivative_fd():
    tf = TimeFactor(1.0, 0.0)
    h = 1e-5
    fd = (lambda_factor(tf, 3 + h)[0] - lambda_factor(tf, 3 - h)[0]) / (2 * h)
    assert lambda_factor(tf, 3.0)[1] == pytest.approx(fd, rel=1e-6)


def test_time_factor_rejects_negative_delta():
    with pytest.raises(DomainError):
        TimeFactor(1.0, 0.5)
    with pytest.raises(DomainError):
        lambda_factor(TimeFactor(1.0, 0.0), -0.5)


@settings(max_examples=30, deadline=None)
@given(mu=st.floats(0.0, 5.0), frac=st.floats(0.0, 1.0), t=st.floats(0.0, 10.0), r=st.floats(0.0, 6.0))
def test_product_solution_solves_adjoint(mu, frac, t, r):
    nusq = frac * (mu - 1) ** 2 / 4
    tf = TimeFactor(mu, nusq)
    t = max(t, 1e-3)  # keep the time stencil inside t >= 0
    res = adjoint_residual_fd(
        lambda tt, rr: adjoint_product_solution(tf, 3, tt, rr), mu, nusq, 3, t + 0.01, np.array([r]), rel_step=1e-4
    )
    assert res <= 1e-5


def test_V_equals_phi_beta():
    for mu, nusq, n in ((1.0, 0.0, 3), (2.0, 0.25, 2), (0.3, 0.01, 1)):
        sd = math.sqrt((mu - 1) ** 2 - 4 * nusq)
        ss = SelfSimilarParams(n + (sd + 1 - mu) / 2, mu, nusq)
        x = np.linspace(0, 2.3, 9)
        np.testing.assert_allclose(V_weight(mu, nusq, n, 2.0, x), phi_beta(ss, n, 2.0, x), rtol=1e-9)
        np.testing.assert_allclose(V_weight_dt(mu, nusq, n, 2.0, x), phi_beta_dt(ss, n, 2.0, x), rtol=1e-8)


def test_V_domain():
    with pytest.raises(DomainError):
        V_weight(1.0, 0.0, 3, 1.0, 2.0)
    with pytest.raises(DomainError):
        phi_beta(SelfSimilarParams(2.0, 1.0, 0.0), 3, 1.0, 2.5)


def test_self_similar_validation():
    with pytest.raises(DomainError):
        SelfSimilarParams(0.5, 0.0, 0.0)  # needs beta > 1
    with pytest.raises(DomainError):
        SelfSimilarParams(2.0, 1.0, 0.5)
    ss = SelfSimilarParams(2.0, 1.0, 0.0)
    assert (ss.a_beta, ss.b_beta) == (1.0, 1.0)
    sh = ss.shifted()
    assert (sh.a_beta, sh.b_beta) == (1.5, 1.5)


def test_phi_beta_at_origin_is_time_power():
    ss = SelfSimilarParams(1.7, 0.6, 0.02)
    assert phi_beta(ss, 3, 4.0, 0.0) == pytest.approx(5.0 ** (1 - 1.7))


@st.composite
def admissible(draw):
    mu = draw(st.floats(0.0, 4.0))
    nusq = draw(st.floats(0.0, 1.0)) * (mu - 1) ** 2 / 4
    sd = math.sqrt(max((mu - 1) ** 2 - 4 * nusq, 0.0))
    beta = (sd + 1 - mu) / 2 + draw(st.floats(0.05, 3.0))
    return SelfSimilarParams(beta, mu, nusq), draw(st.integers(1, 4))


@settings(max_examples=30, deadline=None)
@given(draw=admissible(), t=st.floats(0.2, 20.0), frac=st.floats(0.0, 0.85))
def test_phi_beta_residual_two_routes(draw, t, frac):
    ss, n = draw
    x = np.array([frac * (1 + t)])
    assert phi_beta_adjoint_residual(ss, n, t, x)[0] <= 1e-10
    assert adjoint_residual_fd(lambda tt, rr: phi_beta(ss, n, tt, rr), ss.mu, ss.nusq, n, t, x) <= 1e-5


@settings(max_examples=30, deadline=None)
@given(draw=admissible(), t=st.floats(0.2, 20.0), frac=st.floats(0.0, 0.85))
def test_phi_beta_dt_fd(draw, t, frac):
    ss, n = draw
    x = frac * (1 + t)
    h = 1e-5 * (1 + t)
    fd = (phi_beta(ss, n, t + h, x) - phi_beta(ss, n, t - h, x)) / (2 * h)
    assert phi_beta_dt(ss, n, t, x) == pytest.approx(fd, rel=1e-6, abs=1e-12 * abs(phi_beta(ss, n, t, x)))


def test_cutoff_shape():
    spec = CutoffSpec(8.0)
    t = np.linspace(0, 10, 2001)
    c = cutoff(spec, t)
    assert np.all(c.psi[t <= 4] == 1.0) and np.all(c.psi[t >= 8] == 0.0)
    assert np.all(np.diff(c.psi) <= 0)
    assert np.all(c.psi_star[t < 4] == 0.0)
    np.testing.assert_array_equal(c.psi_star[t >= 4], c.psi[t >= 4])


def test_cutoff_derivatives_fd():
    spec = CutoffSpec(3.0)
    t = np.linspace(1.6, 2.9, 14)
    h = 1e-6
    c = cutoff(spec, t)
    np.testing.assert_allclose(c.dpsi, (cutoff(spec, t + h).psi - cutoff(spec, t - h).psi) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(c.d2psi, (cutoff(spec, t + h).dpsi - cutoff(spec, t - h).dpsi) / (2 * h), atol=1e-7)


def test_cutoff_scalar_and_errors():
    assert cutoff(CutoffSpec(2.0), 0.5).psi == 1.0
    with pytest.raises(DomainError):
        cutoff(CutoffSpec(2.0), -1.0)
    with pytest.raises(DomainError):
        CutoffSpec(0.0)
    with pytest.raises(DomainError):
        CutoffSpec(1.0, profile="gaussian")


def test_cutoff_bound_constants_scale_free():
    for k in (2.0, 4.0):
        cs = [cutoff_bound_constant(CutoffSpec(R), k) for R in (5.0, 50.0, 500.0)]
        assert max(cs) / min(cs) - 1 < 1e-9
        assert math.isfinite(cs[0])


def test_integral_cases():
    ss = SelfSimilarParams(1.0, 1.0, 0.0)
    fit = source_integral_growth(ss, 3, 2.0, 0.5, 32.0, rungs=3)
    assert fit.case == "power"
    assert fit.predicted_exponent == pytest.approx(4.0)
    assert fit.fitted_exponents[-1] == pytest.approx(4.0, abs=0.05)
    edge = source_integral_growth(SelfSimilarParams(3.0, 1.0, 0.0), 3, 2.0, 0.5, 32.0, rungs=3)
    assert edge.case == "power_edge"
    assert edge.fitted_exponents[-1] == pytest.approx(2.0, abs=0.05)
    tie = source_integral_growth(SelfSimilarParams(2.0, 1.0, 0.0), 3, 2.0, 0.5, 32.0, rungs=3)
    assert tie.case == "power_log"
    assert tie.fitted_exponents[-1] > tie.predicted_exponent


def test_integral_rejects_bad_inputs():
    ss = SelfSimilarParams(1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        source_integral(ss, 3, 2.0, 1.0, 16.0)
    with pytest.raises(DomainError):
        source_integral(ss, 3, 2.0, 0.5, 1.5)
    with pytest.raises(DomainError):
        source_integral_growth(SelfSimilarParams(1.5, 1.0, 0.0), 3, 2.0, 0.5, 16.0)


def test_integral_error_type_exists():
    assert issubclass(LightConeQuadratureError, RuntimeError)

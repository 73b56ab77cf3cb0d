from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scalewave.checks import _mms_error
from scalewave.model import ParameterError, SystemParams
from scalewave.solver import (
    GridSpec,
    InitialData,
    LifespanRecord,
    SignConditionError,
    bump_integral,
    density_weight,
    functionals,
    init,
    radial_integral,
    run_lifespan,
    simulate,
    step,
    y_functional,
)

GRID = GridSpec(r_max=4.0, nr=400, t_max=3.0)


def test_grid_validation():
    with pytest.raises(ParameterError):
        GridSpec(r_max=1.0, nr=2, t_max=1.0)
    with pytest.raises(ParameterError):
        GridSpec(r_max=1.0, nr=10, t_max=1.0, cfl=1.2)
    with pytest.raises(ParameterError):
        GridSpec(r_max=-1.0, nr=10, t_max=1.0)
    with pytest.raises(ParameterError):
        GridSpec(r_max=1.0, nr=10, t_max=1.0, refine_levels=0)
    g = GridSpec(r_max=2.0, nr=100, t_max=1.0)
    assert g.dr == pytest.approx(0.02) and g.dt == pytest.approx(0.018)
    assert g.refined(2).nr == 400


def test_light_cone_check():
    with pytest.raises(ParameterError):
        GridSpec(r_max=2.0, nr=100, t_max=2.0).check_light_cone(0.5)


def test_initial_data_validation():
    with pytest.raises(ParameterError):
        InitialData(k=3)
    with pytest.raises(ParameterError):
        InitialData(r0=1.5)
    with pytest.raises(ParameterError):
        InitialData(cu0=-1.0)


def test_init_zero_eps_is_zero_state():
    s = init(InitialData(), GRID, SystemParams(2), eps=0.0)
    for a in (s.u, s.ut, s.v, s.vt):
        assert not np.any(a)


def test_init_scales_with_eps_and_has_compact_support():
    P = SystemParams(2)
    a = init(InitialData(), GRID, P, eps=0.3)
    b = init(InitialData(), GRID, P, eps=0.6)
    np.testing.assert_allclose(b.u, 2 * a.u, rtol=0, atol=0)
    np.testing.assert_allclose(b.vt, 2 * a.vt, rtol=0, atol=0)
    assert not np.any(a.u[GRID.r >= 0.5])
    assert a.u[0] == pytest.approx(0.3)


def test_sign_condition_error():
    # mu = 0 and nu^2 > 0 gives a negative smaller root, so u1 = 0 with u0 > 0 fails
    P = SystemParams(2, mu1=0.0, nu1sq=0.1)
    with pytest.raises(SignConditionError):
        init(InitialData(cu1=0.0), GRID, P)
    init(InitialData(cu1=0.0), GRID, P, check_signs=False)


def test_zero_state_stays_zero():
    s = init(InitialData(), GRID, SystemParams(3, mu1=2.0, nu1sq=0.1), eps=0.0)
    for _ in range(20):
        s = step(s)
    assert s.max_abs() == 0.0
    assert s.n_steps == 20 and s.t == pytest.approx(20 * GRID.dt)


@pytest.mark.parametrize("n", [1, 3])
def test_manufactured_solution_second_order(n):
    errs = [_mms_error(n, nr) for nr in (50, 100, 200)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.8 <= o <= 2.2 for o in orders), orders


@pytest.mark.parametrize("n", [1, 2, 3])
def test_finite_speed(n):
    P = SystemParams(n, mu1=1.5, mu2=0.3, nu1sq=0.05, p=2, q=3, eps=1e-2)
    g = GridSpec(r_max=2.0, nr=4000, t_max=1.0)
    s = init(InitialData(r0=0.5), g, P)
    for _ in range(50):
        s = step(s)
    out = g.r > 0.5 + s.t + 2 * g.dr
    assert np.max(np.abs(s.u[out])) <= 1e-10 * np.max(np.abs(s.u))


def test_linear_problem_is_linear_in_eps():
    P = SystemParams(3, mu1=1.2, mu2=0.5, nu1sq=0.005)
    g = GridSpec(r_max=5.0, nr=400, t_max=3.0)
    a = simulate(init(InitialData(), g, P, 1e-3), nonlinear=False).state
    b = simulate(init(InitialData(), g, P, 3e-3), nonlinear=False).state
    assert np.max(np.abs(3 * a.u - b.u)) <= 1e-10 * np.max(np.abs(b.u))


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 4), st.sampled_from([4, 5, 7]))
def test_bump_integral_quadrature(n, k):
    g = GridSpec(r_max=2.0, nr=4000, t_max=1.0)
    prof = InitialData(k=k).profile(g.r)
    rel = 1e-6 if k == 4 else 1e-5
    assert radial_integral(prof, g, n) == pytest.approx(bump_integral(n, 0.5, k), rel=rel)


def test_functionals_at_zero_time():
    P = SystemParams(3, eps=0.7)
    g = GridSpec(r_max=2.0, nr=2000, t_max=1.0)
    U, V, Fv, Gv = functionals(init(InitialData(cu0=1.3, cu1=2.0, cv1=2.0), g, P))
    assert U == pytest.approx(0.7 * 1.3 * bump_integral(3, 0.5, 4), rel=1e-6)
    assert V == pytest.approx(0.7 * bump_integral(3, 0.5, 4), rel=1e-6)
    assert Fv > 0 and Gv > 0


def test_blowup_detected_and_thresholds_agree():
    P = SystemParams(1, p=2, q=2)
    g = GridSpec(r_max=30.0, nr=600, t_max=25.0)
    res = simulate(init(InitialData(), g, P, eps=0.4))
    assert res.blow_up and res.detection == "threshold"
    t6, t8 = res.T_cross[1e6], res.T_cross[1e8]
    assert t6 < t8 and abs(t6 - t8) / t8 < 0.02


def test_lifespan_decreases_with_eps():
    P = SystemParams(1, p=2, q=2)
    g = GridSpec(r_max=41.0, nr=800, t_max=40.0, refine_levels=2)
    recs = [run_lifespan(InitialData(), g, P, eps=e) for e in (0.2, 0.4, 0.8)]
    Ts = [r.T_num for r in recs]
    assert all(r.blow_up and r.converged for r in recs)
    assert Ts[0] > Ts[1] > Ts[2]
    assert recs[0].nr_levels == [800, 1600]


def test_no_blowup_reports_infinity():
    P = SystemParams(3, p=4, q=4)
    g = GridSpec(r_max=6.0, nr=200, t_max=5.0, refine_levels=2)
    rec = run_lifespan(InitialData(), g, P, eps=0.01)
    assert not rec.blow_up and math.isinf(rec.T_num) and rec.converged
    assert rec.to_dict()["T_num"] == "Infinity"


def test_lifespan_record_to_dict():
    rec = LifespanRecord(eps=0.1, T_num=12.5, blow_up=True, threshold_used=1e8, converged=True, runtime_s=3.0)
    d = rec.to_dict()
    assert "runtime_s" not in d and d["T_num"] == 12.5 and d["T_cross_check"] == "Infinity"
    assert rec.to_dict(include_runtime=True)["runtime_s"] == 3.0


def test_low_threshold_rejected():
    with pytest.raises(ParameterError):
        run_lifespan(InitialData(), GRID, SystemParams(1), threshold=1e5)


def test_y_functional_derivative_and_inequality():
    P = SystemParams(1, mu1=0.5, nu1sq=0.02, p=2, q=2, eps=0.3)
    g = GridSpec(r_max=16.0, nr=1600, t_max=15.0)
    res = simulate(init(InitialData(), g, P), history=True, keep_fields=True)
    T = res.history.t[-1]
    w = density_weight(lambda t, r, u, v: np.abs(v) ** P.p)
    y = y_functional(res.history, w, np.linspace(0.3 * T, 0.9 * T, 4))
    assert np.all(y.inequality_holds)
    assert np.max(y.derivative_rel_err) <= 1e-4


def test_y_functional_rejects_R_beyond_history():
    P = SystemParams(1, eps=0.1)
    g = GridSpec(r_max=6.0, nr=200, t_max=5.0)
    res = simulate(init(InitialData(), g, P), history=True)
    with pytest.raises(ValueError):
        y_functional(res.history, lambda *a: 1.0, [10.0])

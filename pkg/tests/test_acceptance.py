"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <id> PASS|FAIL`` line. Criterion 1 is
marked as a strict expected failure: the leading-order asymptotic for K_1 is
not within 1% for every order up to 3 at t = 40 (see README).
"""
from __future__ import annotations

import json
import time
from pathlib import Path

import pytest

from scalewave.checks import run_suite
from scalewave.cli import cmd_sweep, sweep_document
from scalewave.config import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _report(capsys, cid: str, passed: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nACCEPTANCE {cid} {'PASS' if passed else 'FAIL'}: {detail}")


def _suite_criterion(capsys, cid, suite, stated, budget):
    """Run ``suite`` and judge the named checks against the stated tolerances.

    ``stated`` maps check name to the tolerance in the criterion, or None when
    the criterion is qualitative. A check passes only if its own tolerance is
    no looser than the stated one.
    """
    t0 = time.perf_counter()
    results = {r.name: r for r in run_suite(suite, only=list(stated))}
    seconds = time.perf_counter() - t0
    failures = []
    for name, tol in stated.items():
        r = results[name]
        if not r.passed or (tol is not None and r.tol > tol):
            failures.append(f"{name} value={r.value:.3g} tol={r.tol:.3g}")
    ok = not failures and seconds < budget
    detail = f"{suite} suite, {len(results)} checks in {seconds:.2f}s (limit {budget}s)"
    if failures:
        detail += "; failing: " + "; ".join(failures)
    _report(capsys, cid, ok, detail)
    return ok, failures, seconds


SPECFUN = {
    "k4_derivative": 1e-7,
    "bessel_ode": 1e-7,
    "k1_asymptotic": 1e-2,
    "hyp2f1_identity": 1e-10,
    "hyp2f1_ode": 1e-6,
}


@pytest.mark.xfail(strict=True, reason="leading-order K_1 asymptotic is off by 11% at order 3, t = 40")
def test_criterion_1_special_functions(capsys):
    ok, failures, _ = _suite_criterion(capsys, "1", "specfun", SPECFUN, 10.0)
    assert ok, failures


def test_criterion_1_parts_other_than_k1_asymptotic():
    results = run_suite("specfun", only=[n for n in SPECFUN if n != "k1_asymptotic"])
    for r in results:
        assert r.passed and r.tol <= SPECFUN[r.name], r.line()
    k1 = run_suite("specfun", only=["k1_asymptotic", "k1_first_correction"])
    assert not k1[0].passed and k1[1].passed


def test_criterion_2_test_functions(capsys):
    stated = {
        "lambda_ode": 1e-6,
        "phi_eigen": 1e-5,
        "phi_beta_residual": 1e-5,
        "dt_ratio_bound": None,
        "subcritical_sandwich": None,
        "edge_sandwich": None,
        "V_equals_phi": 1e-9,
    }
    ok, failures, _ = _suite_criterion(capsys, "2", "testfunc", stated, 30.0)
    assert ok, failures


def test_criterion_3_iteration(capsys):
    stated = {
        "closed_forms_exact": 0.0,
        "summation_identities": 1e-12,
        "exponent_sign": None,
        "double_critical": 1e-10,
    }
    ok, failures, _ = _suite_criterion(capsys, "3", "iterkit", stated, 10.0)
    assert ok, failures


def test_criterion_4_critical_curve(capsys):
    stated = {"strauss_root": 1e-12, "mu0_reduction": None, "swap_symmetry": 0.0}
    ok, failures, _ = _suite_criterion(capsys, "4", "model", stated, 5.0)
    assert ok, failures


def test_criterion_5_solver(capsys):
    stated = {
        "mms_order": 0.2,
        "finite_speed": 1e-10,
        "u_ode_residual": 5e-2,
        "y_identity": 1e-4,
    }
    ok, failures, _ = _suite_criterion(capsys, "5", "solver", stated, 180.0)
    assert ok, failures


def test_criterion_6_lifespan_scaling(capsys):
    cfg = load_config(CONFIGS / "sweep_1d.ini")
    t0 = time.perf_counter()
    doc = sweep_document(cfg, jobs=1)
    seconds = time.perf_counter() - t0
    gap = doc["relative_gap"]
    ok = (
        len(doc["points"]) == 5
        and doc["all_converged"]
        and gap is not None
        and gap <= 0.35
        and seconds < 900
    )
    slope = doc["fitted_slope"]
    _report(
        capsys,
        "6",
        ok,
        f"fitted slope {slope:.4f} vs predicted {doc['predicted_slope']:.4f}, gap {100 * gap:.1f}% (limit 35%), "
        f"all converged={doc['all_converged']}, {seconds:.1f}s (exploratory)",
    )
    assert ok


def test_criterion_7_determinism(capsys, tmp_path):
    cfg = load_config(CONFIGS / "sweep_1d.ini")
    assert cmd_sweep(cfg, tmp_path / "a", 1) == 0
    assert cmd_sweep(cfg, tmp_path / "b", 1) == 0
    a = (tmp_path / "a" / "sweep.json").read_bytes()
    b = (tmp_path / "b" / "sweep.json").read_bytes()
    ok = a == b
    _report(capsys, "7", ok, f"two sweeps of the shipped config, {len(a)} bytes each, identical={ok}")
    assert ok
    assert json.loads(a)["points"]

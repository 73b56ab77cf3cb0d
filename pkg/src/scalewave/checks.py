"""Named numerical invariants grouped into suites.

Each check returns a :class:`CheckResult` carrying the measured value and the
tolerance it was compared against. ``run_suites`` drives them for the
``verify`` command and the acceptance tests.
"""
from __future__ import annotations

import math
import random
import time
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from . import iterkit as ik
from .model import F, Regime, SystemParams, classify, pq_grid, roots, strauss_exponent, swap_components
from .solver import (
    GridSpec,
    InitialData,
    bump_integral,
    density_weight,
    functionals,
    init,
    init_from_arrays,
    run_lifespan,
    simulate,
    step,
    y_functional,
)
from .specfun import bessel_k, bessel_k_derivative, bessel_k_second_derivative, hyp2f1, hyp2f1_series
from .testfunc import (
    CutoffSpec,
    SelfSimilarParams,
    TimeFactor,
    V_weight,
    adjoint_residual_fd,
    cutoff_bound_constant,
    lambda_factor,
    lambda_second_derivative,
    source_integral_growth,
    phi_beta,
    phi_beta_adjoint_residual,
    phi_beta_dt,
    phi_yz,
)

__all__ = ["CheckResult", "SUITES", "run_suite", "run_suites"]


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""
    seconds: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("value", "tol"):
            if not math.isfinite(d[k]):
                d[k] = None
        return d

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.suite}.{self.name}: value={self.value:.3g} tol={self.tol:.3g} {self.detail}".rstrip()


def _le(value: float, tol: float, detail: str = "") -> tuple[bool, float, float, str]:
    return bool(value <= tol), float(value), float(tol), detail


# --- specfun -------------------------------------------------------------------------

ORDERS = (0.0, 0.3, 1.0, 2.5, 5.0)
T_GRID = tuple(np.geomspace(0.1, 50.0, 15))


def _fd5(f: Callable[[float], float], x: float, h: float) -> float:
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def check_k4_derivative():
    worst = 0.0
    for s in ORDERS:
        for t in T_GRID:
            d = bessel_k_derivative(s, t)
            fd = _fd5(lambda x: bessel_k(s, x), t, 1e-3 * min(t, 1.0))
            worst = max(worst, abs(d - fd) / abs(d))
    return _le(worst, 1e-7, f"{len(ORDERS) * len(T_GRID)} points")


def check_bessel_ode():
    worst = 0.0
    for s in ORDERS:
        for t in T_GRID:
            k0, k1, k2 = bessel_k(s, t), bessel_k_derivative(s, t), bessel_k_second_derivative(s, t)
            terms = (t * t * k2, t * k1, -(t * t + s * s) * k0)
            worst = max(worst, abs(sum(terms)) / sum(abs(x) for x in terms))
    return _le(worst, 1e-7)


K1_ORDERS = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
K1_TIMES = (40.0, 50.0, 100.0)


def _k1_ratio(s: float, t: float) -> float:
    return bessel_k(s, t) * math.sqrt(2 * t / math.pi) * math.exp(t)


def check_k1_asymptotic():
    worst, where = 0.0, None
    for s in K1_ORDERS:
        for t in K1_TIMES:
            dev = abs(_k1_ratio(s, t) - 1.0)
            if dev > worst:
                worst, where = dev, (s, t)
    return _le(worst, 1e-2, f"worst at (order, t)={where}")


def check_k1_first_correction():
    # the same ratio divided by the first term of the large-t expansion
    worst = 0.0
    for s in K1_ORDERS:
        for t in K1_TIMES:
            corr = 1.0 + (4 * s * s - 1.0) / (8 * t)
            worst = max(worst, abs(_k1_ratio(s, t) / corr - 1.0))
    return _le(worst, 1e-2)


HYP_TRIPLES = ((1.7, 0.9, 2.5), (0.3, 1.4, 1.5), (-0.7, 2.0, 3.2), (2.2, 0.5, 0.8), (0.5, 0.5, 1.0))


def check_hyp2f1_identity():
    z = np.linspace(0.0, 0.9, 91)
    worst = 0.0
    for a, _, c in HYP_TRIPLES:
        got = hyp2f1(a, c, c, z)
        worst = max(worst, float(np.max(np.abs(got / (1 - z) ** (-a) - 1.0))))
    return _le(worst, 1e-10)


def check_hyp2f1_ode():
    z = np.linspace(0.05, 0.8, 31)
    worst = 0.0
    for a, b, c in HYP_TRIPLES:
        f0 = hyp2f1(a, b, c, z)
        f1 = a * b / c * hyp2f1(a + 1, b + 1, c + 1, z)
        f2 = a * b / c * (a + 1) * (b + 1) / (c + 1) * hyp2f1(a + 2, b + 2, c + 2, z)
        terms = (z * (1 - z) * f2, (c - (a + b + 1) * z) * f1, -a * b * f0)
        worst = max(worst, float(np.max(np.abs(sum(terms)) / sum(np.abs(x) for x in terms))))
    return _le(worst, 1e-6)


def _gauss_constant(a: float, b: float, c: float) -> float:
    ex = c - a - b
    if ex > 0:
        return math.exp(gammaln(c) + gammaln(ex) - gammaln(c - a) - gammaln(c - b))
    if ex == 0:
        return math.exp(gammaln(c) - gammaln(a) - gammaln(b))
    return math.exp(gammaln(c) + gammaln(-ex) - gammaln(a) - gammaln(b))


def check_hyp2f1_growth():
    # ratio to the model growth, normalised by the Gauss-type limit constant
    lo, hi = math.inf, 0.0
    for a, b, c in ((0.3, 0.4, 1.5), (0.5, 0.5, 1.0), (1.2, 1.1, 1.5)):
        L = _gauss_constant(a, b, c)
        for k in range(2, 7):
            z = 1.0 - 10.0**-k
            val = hyp2f1_series(a, b, c, z, max_terms=int(min(1e8, 60 / (1 - z)))).value
            ex = c - a - b
            model = 1.0 if ex > 0 else (-math.log1p(-z) if ex == 0 else (1 - z) ** ex)
            ratio = val / model / L
            lo, hi = min(lo, ratio), max(hi, ratio)
    ok = 0.5 <= lo and hi <= 2.0
    return ok, max(hi, 1 / lo), 2.0, f"normalised ratio in [{lo:.4g}, {hi:.4g}]"


# --- model ---------------------------------------------------------------------------


def check_strauss_root():
    worst = 0.0
    for n in range(2, 7):
        p0 = strauss_exponent(n)
        root = brentq(lambda p: F(n, p, p), 1.0 + 1e-9, 20.0, xtol=1e-15, rtol=1e-15)
        quad = (n - 1) * p0**2 - (n + 1) * p0 - 2
        rep = classify(SystemParams(n, p=p0, q=p0), tol=1e-12)
        if rep.regime is not Regime.CRITICAL:
            return False, math.inf, 1e-12, f"n={n} not classified critical"
        worst = max(worst, abs(root - p0), abs(quad))
    return _le(worst, 1e-12)


def check_mu0_reduction():
    ps = np.linspace(1.05, 6.0, 50)
    worst = 0.0
    mismatch = 0
    for n in (1, 2, 3, 4):
        grid = pq_grid(SystemParams(n), (1.05, 6.0), (1.05, 6.0), 50)
        for i, p in enumerate(ps):
            for j, q in enumerate(ps):
                rep = grid[i][j]
                g1 = (p + 2 + 1 / q) / (p * q - 1) - (n - 1) / 2
                g2 = (q + 2 + 1 / p) / (p * q - 1) - (n - 1) / 2
                worst = max(worst, abs(rep.F1 - g1), abs(rep.F2 - g2))
                classical_sub = max(p + 2 + 1 / q, q + 2 + 1 / p) / (p * q - 1) > (n - 1) / 2 + 1e-12
                mismatch += classical_sub != (rep.regime is Regime.SUBCRITICAL)
    return worst <= 1e-14 and mismatch == 0, worst, 1e-14, f"{mismatch} regime mismatches"


def check_swap_symmetry():
    base = SystemParams(2, mu1=1.5, mu2=0.4, nu1sq=0.05, nu2sq=0.02)
    g = pq_grid(base, (1.05, 5.0), (1.05, 5.0), 50)
    s = pq_grid(swap_components(base), (1.05, 5.0), (1.05, 5.0), 50)
    bad = 0
    worst = 0.0
    for i in range(50):
        for j in range(50):
            a, b = g[i][j], s[j][i]
            bad += a.regime != b.regime
            worst = max(worst, abs(a.F1 - b.F2), abs(a.F2 - b.F1))
    return bad == 0 and worst == 0.0, worst, 0.0, f"{bad} regime mismatches on 50x50"


def check_monotone_in_d():
    ds = np.linspace(1.0, 8.0, 40)
    for p in np.linspace(1.1, 5.0, 12):
        for q in np.linspace(1.1, 5.0, 12):
            if np.any(np.diff([F(d, p, q) for d in ds]) >= 0):
                return False, 1.0, 0.0, f"not decreasing at p={p}, q={q}"
    return True, 0.0, 0.0, ""


def check_root_identities():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        mu = rng.uniform(0, 6)
        nusq = rng.uniform(0, (mu - 1) ** 2 / 4)
        P = SystemParams(1, mu1=mu, nu1sq=nusq, mu2=mu / 2, nu2sq=0.0)
        rp = roots(P)
        worst = max(worst, abs(rp.r1 + rp.r2 - (mu - 1)), abs(rp.r1 * rp.r2 - nusq))
        worst = max(worst, abs(rp.rho1 + rp.rho2 - (mu / 2 - 1)), abs(rp.rho1 * rp.rho2))
    return _le(worst, 1e-13)


# --- testfunc ------------------------------------------------------------------------


def check_lambda_ode():
    worst = 0.0
    for mu, nusq in ((2.0, 0.25), (0.0, 0.0), (1.0, 0.0), (3.0, 0.5), (0.5, 0.05), (5.0, 2.0)):
        tf = TimeFactor(mu, nusq)
        for t in (0.0, 0.5, 1.7, 5.0, 20.0):
            s = 1.0 + t
            lam, dlam = lambda_factor(tf, t)
            d2 = lambda_second_derivative(tf, t)
            terms = (d2, -mu / s * dlam, ((mu + nusq) / s**2 - 1.0) * lam)
            worst = max(worst, abs(sum(terms)) / sum(abs(x) for x in terms))
    return _le(worst, 1e-6)


def check_phi_eigen():
    r = np.linspace(0.1, 5.0, 50)
    h = 1e-3
    worst = 0.0
    for n in (1, 2, 3):
        f0, fp, fm = phi_yz(n, r), phi_yz(n, r + h), phi_yz(n, r - h)
        lap = (fp - 2 * f0 + fm) / h**2 + (n - 1) / r * (fp - fm) / (2 * h)
        worst = max(worst, float(np.max(np.abs(lap / f0 - 1.0))))
    return _le(worst, 1e-5)


def check_phi_asymptotic():
    worst = 0.0
    for n in (1, 2, 3, 4):
        c20, c40 = (phi_yz(n, x) * x ** ((n - 1) / 2) * math.exp(-x) for x in (20.0, 40.0))
        worst = max(worst, abs(c40 / c20 - 1.0))
    return _le(worst, 0.02)


def _ss_draws() -> list[tuple[SelfSimilarParams, int]]:
    return [
        (SelfSimilarParams(1.2, 2.0, 0.25), 3),
        (SelfSimilarParams(1.3, 0.0, 0.0), 1),
        (SelfSimilarParams(2.5, 1.0, 0.0), 2),
        (SelfSimilarParams(1.7, 3.0, 0.6), 3),
        (SelfSimilarParams(3.1, 0.4, 0.05), 4),
    ]


def check_family_shift():
    # exact in real arithmetic; in floats allow a few units in the last place
    worst = 0.0
    for ss, _ in _ss_draws():
        sh = ss.shifted(1.0)
        for x, y in ((sh.a_beta, ss.a_beta + 0.5), (sh.b_beta, ss.b_beta + 0.5)):
            worst = max(worst, abs(x - y) / math.ulp(y))
    return _le(worst, 4.0, "difference in ulps")


def check_pochhammer_params():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        mu = rng.uniform(0, 5)
        nusq = rng.uniform(0, (mu - 1) ** 2 / 4)
        sd = math.sqrt((mu - 1) ** 2 - 4 * nusq)
        beta = (sd + 1 - mu) / 2 + rng.uniform(0.01, 4)
        ss = SelfSimilarParams(beta, mu, nusq)
        a, b = ss.a_beta, ss.b_beta
        worst = max(
            worst,
            abs(a + b - (beta + (mu - 1) / 2)) / max(1, abs(a + b)),
            abs(a * b - (beta * beta + beta * (mu - 1) + nusq) / 4) / max(1, abs(a * b)),
            abs(a - b - sd / 2) / max(1, abs(a - b)),
        )
    return _le(worst, 1e-13)


def _ss_points(t: float) -> np.ndarray:
    return np.array([0.0, 0.3, 0.6, 0.85]) * (1.0 + t)


def check_phi_beta_residual():
    worst_a = worst_fd = 0.0
    for ss, n in _ss_draws():
        for t in (0.5, 2.0, 10.0):
            x = _ss_points(t)
            worst_a = max(worst_a, float(np.max(phi_beta_adjoint_residual(ss, n, t, x))))
            fd = adjoint_residual_fd(lambda tt, rr: phi_beta(ss, n, tt, rr), ss.mu, ss.nusq, n, t, x)
            worst_fd = max(worst_fd, float(np.max(fd)))
    worst = max(worst_a, worst_fd)
    return _le(worst, 1e-5, f"analytic {worst_a:.2g}, finite difference {worst_fd:.2g}")


def check_phi_beta_dt():
    worst = 0.0
    for ss, n in _ss_draws():
        for t in (0.5, 2.0, 10.0):
            x = _ss_points(t)
            h = 1e-4 * (1 + t)
            fd = (phi_beta(ss, n, t + h, x) - phi_beta(ss, n, t - h, x)) / (2 * h)
            an = phi_beta_dt(ss, n, t, x)
            worst = max(worst, float(np.max(np.abs(fd - an) / np.abs(an).clip(1e-300))))
    return _le(worst, 1e-6)


_Z = np.concatenate([np.linspace(0.0, 0.99, 100), 1 - np.geomspace(1e-2, 1e-3, 8)])
_T_LADDER = (0.0, 1.0, 10.0, 100.0, 1000.0)


def _scale_spread(per_t: list[float]) -> float:
    return max(per_t) / min(per_t) - 1.0


def check_dt_ratio_bound():
    worst = 0.0
    for ss, n in _ss_draws():
        consts = []
        for t in _T_LADDER:
            x = np.sqrt(_Z) * (1 + t)
            ratio = np.abs(phi_beta_dt(ss, n, t, x)) / phi_beta(ss.shifted(1.0), n, t, x)
            if not np.all(np.isfinite(ratio)):
                return False, math.inf, 1e-6, "non-finite ratio"
            consts.append(float(np.max(ratio)))
        worst = max(worst, _scale_spread(consts))
    return _le(worst, 1e-6, "spread of sup ratio across t in 1..1000")


def _sandwich(ratios: np.ndarray, L: float) -> float:
    # violation of min(1, L) <= ratio <= max(1, L), relative
    lo, hi = min(1.0, L), max(1.0, L)
    return float(max(np.max((lo - ratios) / lo), np.max((ratios - hi) / hi), 0.0))


def check_subcritical_sandwich():
    worst, spread = 0.0, 0.0
    for mu, nusq, n in ((1.0, 0.0, 3), (2.0, 0.25, 3), (0.5, 0.05, 2), (0.0, 0.0, 4)):
        sd = math.sqrt((mu - 1) ** 2 - 4 * nusq)
        lo, hi = (sd + 1 - mu) / 2, (n + 1 - mu) / 2
        for frac in (0.2, 0.5, 0.8):
            ss = SelfSimilarParams(lo + frac * (hi - lo), mu, nusq)
            L = _gauss_constant(ss.a_beta, ss.b_beta, n / 2)
            consts = []
            for t in _T_LADDER:
                x = np.sqrt(_Z) * (1 + t)
                r = phi_beta(ss, n, t, x) / (1 + t) ** (1 - ss.beta)
                worst = max(worst, _sandwich(r, L))
                consts.append(float(np.max(r)))
            spread = max(spread, _scale_spread(consts))
    return _le(max(worst, spread), 1e-6, f"sandwich violation {worst:.2g}, scale spread {spread:.2g}")


def check_edge_sandwich():
    worst, spread = 0.0, 0.0
    for mu, nusq, n in ((1.0, 0.0, 3), (2.0, 0.25, 3), (0.5, 0.05, 2), (0.0, 0.0, 4)):
        edge = (n + 1 - mu) / 2
        for shift in (0.3, 1.0, 2.5):
            ss = SelfSimilarParams(edge + shift, mu, nusq)
            a, b, c = ss.a_beta, ss.b_beta, n / 2
            # Euler's transformation makes the ratio 2F1(c-a, c-b; c; z), which tends to this constant
            L = math.exp(gammaln(c) + gammaln(a + b - c) - gammaln(a) - gammaln(b))
            consts = []
            for t in _T_LADDER:
                x = np.sqrt(_Z) * (1 + t)
                r = phi_beta(ss, n, t, x) / ((1 + t) ** (1 - ss.beta) * (1 - _Z) ** (edge - ss.beta))
                worst = max(worst, _sandwich(r, L))
                consts.append(float(np.max(r)))
            spread = max(spread, _scale_spread(consts))
    return _le(max(worst, spread), 1e-6, f"sandwich violation {worst:.2g}, scale spread {spread:.2g}")


def check_V_equals_phi():
    worst = 0.0
    for mu, nusq, n in ((1.0, 0.0, 3), (2.0, 0.25, 3), (0.5, 0.05, 1), (3.0, 0.5, 2)):
        sd = math.sqrt((mu - 1) ** 2 - 4 * nusq)
        ss = SelfSimilarParams(n + (sd + 1 - mu) / 2, mu, nusq)
        for t in (0.0, 1.0, 10.0, 100.0):
            x = np.linspace(0, 0.95, 20) * (1 + t)
            v, ph = V_weight(mu, nusq, n, t, x), phi_beta(ss, n, t, x)
            worst = max(worst, float(np.max(np.abs(v / ph - 1))))
    return _le(worst, 1e-9)


def check_cutoff_scale():
    worst = 0.0
    for k in (2.0, 3.0, 4.0):
        for order in (1, 2):
            cs = [cutoff_bound_constant(CutoffSpec(R), k, order) for R in (4.0, 16.0, 64.0)]
            if not all(math.isfinite(c) for c in cs):
                return False, math.inf, 1e-9, f"infinite constant for k={k}"
            worst = max(worst, _scale_spread(cs))
    return _le(worst, 1e-9)


def check_integral_growth():
    worst = 0.0
    notes = []
    for beta in (1.0, 2.0, 3.0):
        fit = source_integral_growth(SelfSimilarParams(beta, 1.0, 0.0), 3, 2.0, 0.5, 64.0, rungs=3)
        got = fit.log_corrected_exponents if fit.case == "power_log" else fit.fitted_exponents
        err = abs(got[-1] - fit.predicted_exponent)
        if fit.case == "power_log" and not fit.fitted_exponents[-1] > fit.predicted_exponent:
            return False, err, 0.1, "no logarithmic excess in the equality case"
        worst = max(worst, err)
        notes.append(f"{fit.case}:{got[-1]:.3f}/{fit.predicted_exponent:.3f}")
    return _le(worst, 0.1, " ".join(notes))


# --- iterkit -------------------------------------------------------------------------


def rational_draws(count: int = 6, seed: int = 2024) -> list[ik.IterationInputs]:
    """Random inputs with rational square roots of the discriminants."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        n = rng.randint(1, 5)
        mus, rs = [], []
        for _ in range(2):
            mu = Fraction(rng.randint(0, 40), rng.randint(1, 8))
            s = abs(mu - 1) * Fraction(rng.randint(0, 6), 6)  # sqrt(delta), so nu^2 = ((mu-1)^2 - s^2)/4 >= 0
            mus.append(mu)
            rs.append((mu - 1 + s) / 2)
        p = 1 + Fraction(rng.randint(1, 30), rng.randint(2, 9))
        q = 1 + Fraction(rng.randint(1, 30), rng.randint(2, 9))
        if min(rs) + 1 <= 0:
            continue
        out.append(ik.IterationInputs(n, mus[0], mus[1], p, q, rs[0], rs[1]))
    return out


def check_closed_forms_exact():
    res = ik.recurrence_battery(rational_draws(), 25)
    bad = [(r[0], r[1]) for r in res if not r[2]]
    exact = all(inp.exact for inp, _, _ in res)
    return not bad and exact, float(len(bad)), 0.0, f"{len(res)} exact comparisons over odd j <= 25"


def check_summation_identities():
    worst = 0.0
    for pq in (Fraction(3, 2), Fraction(4), Fraction(17, 5)):
        for j in range(3, 26, 2):
            if ik.summation_identities(pq, j) != ik.summation_bruteforce(pq, j):
                return False, math.inf, 1e-12, f"exact mismatch at pq={pq}, j={j}"
    rng = np.random.default_rng(3)
    for pq in rng.uniform(1.1, 9.0, 25):
        for j in range(3, 26, 2):
            for x, y in zip(ik.summation_identities(float(pq), j), ik.summation_bruteforce(float(pq), j)):
                worst = max(worst, abs(x - y) / abs(y))
    return _le(worst, 1e-12)


def float_draws(count: int = 100, seed: int = 5) -> list[ik.IterationInputs]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, 6))
        mu1, mu2 = rng.uniform(0, 6, 2)
        nu1 = rng.uniform(0, (mu1 - 1) ** 2 / 4)
        nu2 = rng.uniform(0, (mu2 - 1) ** 2 / 4)
        p, q = rng.uniform(1.01, 6, 2)
        P = SystemParams(n, mu1=mu1, mu2=mu2, nu1sq=nu1, nu2sq=nu2, p=p, q=q)
        out.append(ik.IterationInputs.from_params(P, exact=False))
    return out


def check_exponent_sign():
    draws = float_draws()
    agree = [ik.F_branch_sign_agrees(inp) for inp in draws]
    bad = sum(not (a and b) for a, b in agree)
    worst = 0.0
    for inp in draws:
        gap = float(ik.exponent_gap(inp))
        worst = max(worst, abs(gap - inp.p * F(inp.n + inp.mu2, inp.q, inp.p)) / max(1.0, abs(gap)))
        gt = float(ik.exponent_gap(inp, tilde=True))
        worst = max(worst, abs(gt - inp.q * F(inp.n + inp.mu1, inp.p, inp.q)) / max(1.0, abs(gt)))
    return bad == 0 and worst <= 1e-12, worst, 1e-12, f"{bad} sign disagreements in {len(draws)} draws"


def double_critical_family() -> list[tuple[int, float, float, float, float]]:
    """``(n, p, q, mu1, mu2)`` with both ``F`` values zero."""
    out = []
    for n, p, q in ((1, 2.0, 2.0), (1, 1.5, 3.0), (2, 1.3, 1.8), (1, 2.5, 1.6), (3, 1.2, 1.4), (2, 1.1, 2.0)):
        mu1 = 2 * (p + 2 + 1 / q) / (p * q - 1) - n + 1
        mu2 = 2 * (q + 2 + 1 / p) / (p * q - 1) - n + 1
        out.append((n, p, q, mu1, mu2))
    return out


def check_double_critical():
    worst = 0.0
    for n, p, q, mu1, mu2 in double_critical_family():
        P = SystemParams(n, mu1=mu1, mu2=mu2, p=p, q=q)
        rep = classify(P, tol=1e-10)
        if rep.regime is not Regime.CRITICAL:
            return False, math.inf, 1e-10, f"family member {(n, p, q)} is not critical"
        bq = (n - mu1 + 1) / 2 - 1 / q
        bp = (n - mu2 + 1) / 2 - 1 / p
        worst = max(worst, abs(bq - 1 - (n - (n + mu2 - 1) * p / 2)), abs(bp - 1 - (n - (n + mu1 - 1) * q / 2)))
    return _le(worst, 1e-10)


def check_AB_bookkeeping():
    bad = 0
    for inp in rational_draws():
        c = ik.constants(inp)
        table = ik.sequences_recurrence(inp, 3)
        r1, r3 = table.row(1), table.row(3)
        pq = inp.pq
        bad += r3.a - pq * r1.a != c.A or r3.b - pq * r1.b != c.B
        bad += r3.alpha - pq * r1.alpha != c.A_tilde or r3.beta - pq * r1.beta != c.B_tilde
        bad += c.B0 != inp.n - 1 + ((inp.r2 + 3) * pq + (inp.rho2 + 3) * inp.p) / (pq - 1)
    return bad == 0, float(bad), 0.0, "exact"


def check_envelope_divergence():
    P = SystemParams(1, p=2.0, q=2.0, eps=0.1)
    inp = ik.IterationInputs.from_params(P)
    table = ik.sequences_recurrence(inp, 41, eps=P.eps)
    rep = ik.blowup_thresholds(P)
    tstar = ik.divergence_time(table)
    F2 = P.F2
    bound = max(2.0 + 1.0, 1.0 + rep.E * P.eps ** (-1 / F2))
    below = np.diff([x[1] for x in ik.lower_bound_envelope(table, 0.5 * tstar)])
    above = np.diff([x[1] for x in ik.lower_bound_envelope(table, 2.0 * tstar)])
    ok = tstar <= bound and np.all(below[-5:] < 0) and np.all(above[-5:] > 0)
    return ok, tstar / bound, 1.0, f"divergence time {tstar:.4g}, bound {bound:.4g}"


# --- solver --------------------------------------------------------------------------


def _mms_error(n: int, nr: int, mu: float = 0.7, nusq: float = 0.02, om: float = 1.3, T: float = 2.0):
    P = SystemParams(n, mu1=mu, mu2=mu, nu1sq=nusq, nu2sq=nusq)
    g = GridSpec(r_max=4.0, nr=nr, t_max=T)
    kk = math.pi / 8.0

    def rho(r):
        return np.cos(kk * r)

    def lap(r):
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(r > 0, -kk * np.sin(kk * r) / np.where(r > 0, r, 1.0), -kk * kk)
        return -kk * kk * np.cos(kk * r) + (n - 1) * radial

    def forcing(t, r):
        s = 1.0 + t
        c, sn = math.cos(om * t), math.sin(om * t)
        return (-om * om * c + nusq / s**2 * c - mu / s * om * sn) * rho(r) - c * lap(r)

    st = init_from_arrays(g, P, rho(g.r), np.zeros(nr + 1), rho(g.r), np.zeros(nr + 1))
    res = simulate(st, nonlinear=False, forcing_u=forcing, forcing_v=forcing, t_end=T)
    s = res.state
    return float(np.max(np.abs(s.u - math.cos(om * s.t) * rho(g.r))))


def check_mms_order():
    orders = []
    for n in (1, 3):
        errs = [_mms_error(n, nr) for nr in (50, 100, 200, 400)]
        orders += [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    ok = all(1.8 <= o <= 2.2 for o in orders)
    worst = max(abs(o - 2.0) for o in orders)
    return ok, worst, 0.2, "orders " + ", ".join(f"{o:.3f}" for o in orders)


def check_finite_speed():
    worst = 0.0
    for n in (1, 2, 3):
        P = SystemParams(n, mu1=1.5, mu2=0.3, nu1sq=0.05, p=2, q=3, eps=1e-2)
        g = GridSpec(r_max=2.0, nr=4000, t_max=1.0)
        s = init(InitialData(r0=0.5), g, P)
        for _ in range(100):
            s = step(s)
            out = g.r > 0.5 + s.t + 2 * g.dr
            worst = max(
                worst,
                float(np.max(np.abs(s.u[out])) / np.max(np.abs(s.u))),
                float(np.max(np.abs(s.v[out])) / np.max(np.abs(s.v))),
            )
    return _le(worst, 1e-10, "100 steps, bump power 4, r0/dr = 1000")


def check_eps_linearity():
    worst = 0.0
    for n in (1, 3):
        P = SystemParams(n, mu1=1.2, mu2=0.5, nu1sq=0.005, p=2, q=2)
        g = GridSpec(r_max=8.0, nr=800, t_max=6.0)
        a = simulate(init(InitialData(), g, P, 1e-3), nonlinear=False).state
        b = simulate(init(InitialData(), g, P, 3e-3), nonlinear=False).state
        for x, y in ((a.u, b.u), (a.v, b.v)):
            worst = max(worst, float(np.max(np.abs(3 * x - y)) / np.max(np.abs(y))))
    return _le(worst, 1e-10)


def check_bump_integral():
    worst = 0.0
    for n in (1, 2, 3, 4):
        P = SystemParams(n, eps=0.7)
        g = GridSpec(r_max=2.0, nr=4000, t_max=1.0)
        st = init(InitialData(cu0=1.3, cu1=2.0, cv1=2.0), g, P)
        U = functionals(st)[0]
        worst = max(worst, abs(U / (0.7 * 1.3 * bump_integral(n, 0.5, 4)) - 1))
    return _le(worst, 1e-6)


_RUNS: dict = {}


def _diagnostic_run(n: int):
    """A blow-up run with stored fields shared by several checks."""
    if n not in _RUNS:
        if n == 1:
            P = SystemParams(1, mu1=0.5, nu1sq=0.02, p=2, q=2, eps=0.3)
        else:
            P = SystemParams(3, mu1=2.0, mu2=1.0, nu1sq=0.1, p=2, q=2, eps=1.0)
        g = GridSpec(r_max=30.0, nr=3000, t_max=25.0)
        _RUNS[n] = (P, simulate(init(InitialData(), g, P), history=True, keep_fields=True))
    return _RUNS[n]


def check_u_ode_residual():
    worst = 0.0
    for n in (1, 3):
        P, res = _diagnostic_run(n)
        a = res.history.arrays()
        t, U = a["t"], a["U"]
        dt0 = t[1] - t[0]
        i = np.arange(1, len(t) - 1)
        i = i[np.isclose(t[i + 1] - t[i], dt0) & np.isclose(t[i] - t[i - 1], dt0)]
        # smooth portion: before the growth becomes steep
        i = i[a["max_u"][i + 1] < 1e3]
        U1 = (U[i + 1] - U[i - 1]) / (2 * dt0)
        U2 = (U[i + 1] - 2 * U[i] + U[i - 1]) / dt0**2
        s = 1 + t[i]
        terms = (U2, P.mu1 / s * U1, P.nu1sq / s**2 * U[i], -a["src_u"][i])
        rel = np.abs(sum(terms)) / sum(np.abs(x) for x in terms)
        worst = max(worst, float(np.max(rel)))
    return _le(worst, 5e-2)


def check_y_identity():
    worst = 0.0
    holds = True
    for n in (1, 3):
        P, res = _diagnostic_run(n)
        T = res.history.t[-1]
        w = density_weight(lambda t, r, u, v: np.abs(v) ** P.p)
        with warnings.catch_warnings():
            warnings.simplefilter("error", RuntimeWarning)
            y = y_functional(res.history, w, np.linspace(0.2 * T, 0.9 * T, 6))
        worst = max(worst, float(np.max(y.derivative_rel_err)))
        holds &= bool(np.all(y.inequality_holds))
    return holds and worst <= 1e-4, worst, 1e-4, "inequality holds" if holds else "inequality violated"


def check_y_constant_weight():
    # for w = 1 on the unit ball, Y(R) = |B_1| R int_{1/2}^1 psi = |B_1| R / 4
    tail = 1 - sum(Fraction(c, e) for c, e in ((35, 5), (-84, 6), (70, 7), (-20, 8)))
    const = float(tail) / 2
    worst = 0.0
    for n in (1, 3):
        _, res = _diagnostic_run(n)
        T = res.history.t[-1]
        vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
        R = np.linspace(0.2 * T, 0.9 * T, 6)
        y = y_functional(res.history, lambda *args: vol, R)
        worst = max(worst, float(np.max(np.abs(y.Y / (vol * const * R) - 1))))
    return _le(worst, 1e-6)


def _blowup_runs():
    _, res1 = _diagnostic_run(1)
    if "blowup3" not in _RUNS:
        P = SystemParams(3, p=2, q=2, eps=30.0)
        g = GridSpec(r_max=30.0, nr=3000, t_max=25.0)
        _RUNS["blowup3"] = simulate(init(InitialData(cu1=2.0, cv1=2.0), g, P), history=True)
    return [res1, _RUNS["blowup3"]]


def check_F_nonnegative():
    lo = math.inf
    for res in _blowup_runs():
        if not res.blow_up:
            return False, math.inf, 0.0, "run did not blow up"
        a = res.history.arrays()
        lo = min(lo, float(np.min(a["F"])), float(np.min(a["G"])))
    return lo >= 0, lo, 0.0, "min of F and G along runs up to blow-up"


def check_threshold_robustness():
    worst = 0.0
    for res in _blowup_runs():
        t6, t8 = res.T_cross[1e6], res.T_cross[1e8]
        if not (math.isfinite(t6) and math.isfinite(t8)):
            return False, math.inf, 0.02, "run did not blow up"
        worst = max(worst, abs(t6 - t8) / t8)
    return _le(worst, 0.02)


def check_refinement_stable():
    P = SystemParams(1, p=2.0, q=2.0)
    rec = run_lifespan(InitialData(), GridSpec(r_max=121.0, nr=2400, t_max=120.0, refine_levels=3), P, eps=0.4)
    ok = rec.blow_up and rec.converged
    spread = abs(rec.T_levels[-1] - rec.T_levels[-2]) / rec.T_levels[-1] if rec.blow_up else math.inf
    return ok, spread, 0.05, f"T levels {[round(x, 4) for x in rec.T_levels]}"


SUITES: dict[str, list[tuple[str, Callable]]] = {
    "specfun": [
        ("k4_derivative", check_k4_derivative),
        ("bessel_ode", check_bessel_ode),
        ("k1_asymptotic", check_k1_asymptotic),
        ("k1_first_correction", check_k1_first_correction),
        ("hyp2f1_identity", check_hyp2f1_identity),
        ("hyp2f1_ode", check_hyp2f1_ode),
        ("hyp2f1_growth", check_hyp2f1_growth),
    ],
    "model": [
        ("strauss_root", check_strauss_root),
        ("mu0_reduction", check_mu0_reduction),
        ("swap_symmetry", check_swap_symmetry),
        ("monotone_in_d", check_monotone_in_d),
        ("root_identities", check_root_identities),
    ],
    "testfunc": [
        ("lambda_ode", check_lambda_ode),
        ("phi_eigen", check_phi_eigen),
        ("phi_asymptotic", check_phi_asymptotic),
        ("family_shift", check_family_shift),
        ("pochhammer_params", check_pochhammer_params),
        ("phi_beta_residual", check_phi_beta_residual),
        ("phi_beta_dt", check_phi_beta_dt),
        ("dt_ratio_bound", check_dt_ratio_bound),
        ("subcritical_sandwich", check_subcritical_sandwich),
        ("edge_sandwich", check_edge_sandwich),
        ("V_equals_phi", check_V_equals_phi),
        ("cutoff_scale", check_cutoff_scale),
        ("integral_growth", check_integral_growth),
    ],
    "iterkit": [
        ("closed_forms_exact", check_closed_forms_exact),
        ("summation_identities", check_summation_identities),
        ("exponent_sign", check_exponent_sign),
        ("double_critical", check_double_critical),
        ("AB_bookkeeping", check_AB_bookkeeping),
        ("envelope_divergence", check_envelope_divergence),
    ],
    "solver": [
        ("mms_order", check_mms_order),
        ("finite_speed", check_finite_speed),
        ("eps_linearity", check_eps_linearity),
        ("bump_integral", check_bump_integral),
        ("u_ode_residual", check_u_ode_residual),
        ("y_identity", check_y_identity),
        ("y_constant_weight", check_y_constant_weight),
        ("F_nonnegative", check_F_nonnegative),
        ("threshold_robustness", check_threshold_robustness),
        ("refinement_stable", check_refinement_stable),
    ],
}


def run_check(suite: str, name: str, func: Callable) -> CheckResult:
    t0 = time.perf_counter()
    try:
        passed, value, tol, detail = func()
    except Exception as exc:  # a crashing check is a failed check
        passed, value, tol, detail = False, math.nan, math.nan, f"{type(exc).__name__}: {exc}"
    return CheckResult(suite, name, bool(passed), float(value), float(tol), detail, time.perf_counter() - t0)


def run_suite(suite: str, only: list[str] | None = None) -> list[CheckResult]:
    if suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    return [run_check(suite, name, f) for name, f in SUITES[suite] if only is None or name in only]


def run_suites(suites: list[str]) -> dict:
    """Run suites in order; returns ``{"suites": {name: {...}}, "passed": bool}``."""
    out = {}
    for s in suites:
        t0 = time.perf_counter()
        results = run_suite(s)
        out[s] = {
            "seconds": time.perf_counter() - t0,
            "passed": all(r.passed for r in results),
            "checks": [r.to_dict() for r in results],
        }
    return {"suites": out, "passed": all(v["passed"] for v in out.values())}

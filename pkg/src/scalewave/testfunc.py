"""Explicit test functions for the adjoint linear problem and their residual checks.

Everything here is radial: ``x_norm`` is ``|x|``. Functions accept scalars or
numpy arrays in the spatial argument unless noted otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammaln

from .model import delta
from .specfun import DomainError, bessel_k, hyp2f1, hyp2f1_series

__all__ = [
    "LightConeQuadratureError",
    "TimeFactor",
    "SelfSimilarParams",
    "CutoffSpec",
    "CutoffValues",
    "SourceGrowthFit",
    "sphere_area",
    "phi_yz",
    "lambda_factor",
    "lambda_second_derivative",
    "adjoint_product_solution",
    "V_weight",
    "V_weight_dt",
    "phi_beta",
    "phi_beta_dt",
    "phi_beta_adjoint_residual",
    "adjoint_residual_fd",
    "cutoff",
    "cutoff_bound_constant",
    "source_integral",
    "source_integral_growth",
]


class LightConeQuadratureError(RuntimeError):
    """Quadrature near the light cone produced an unusable value."""


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere ``S^{n-1}`` in ``R^n`` (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(256)
_THETA = 0.5 * math.pi * (_GL_X + 1.0)
_THETA_W = 0.5 * math.pi * _GL_W


def phi_yz(n: int, x_norm):
    """``phi(x) = int_{S^{n-1}} exp(x . omega) d omega`` (``2 cosh x`` for n = 1).

    For ``n >= 2`` the sphere integral is reduced to the polar angle and
    integrated with 256-point Gauss-Legendre; the factor ``exp(|x|)`` is
    pulled out so large arguments keep full relative accuracy.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n}")
    r = np.asarray(x_norm, dtype=float)
    if np.any(r < 0):
        raise DomainError("x_norm must be nonnegative")
    if n == 1:
        out = np.exp(r) + np.exp(-r)
    else:
        rr = np.atleast_1d(r)[..., None]
        weights = _THETA_W * np.sin(_THETA) ** (n - 2)
        inner = np.exp(rr * (np.cos(_THETA) - 1.0)) @ weights
        out = (sphere_area(n - 1) * inner * np.exp(np.atleast_1d(r))).reshape(r.shape)
    return float(out) if r.ndim == 0 else out


@dataclass(frozen=True)
class TimeFactor:
    """``lambda(t) = (1+t)^{(mu+1)/2} K_s(1+t)`` with ``s = sqrt(delta)/2``."""

    mu: float
    nusq: float

    def __post_init__(self) -> None:
        if delta(self.mu, self.nusq) < 0:
            raise DomainError("time factor needs (mu-1)^2 - 4 nu^2 >= 0")

    @property
    def varsigma(self) -> float:
        return math.sqrt(delta(self.mu, self.nusq)) / 2.0


def _power_bessel_derivs(m: float, nu: float, s: float) -> tuple[float, float, float]:
    # value, first and second derivative of s^m K_nu(s)
    k0 = bessel_k(nu, s)
    k1 = bessel_k(nu + 1.0, s)
    k2 = bessel_k(nu + 2.0, s)
    val = s**m * k0
    d1 = (m + nu) * s ** (m - 1) * k0 - s**m * k1
    d2 = (
        (m + nu) * (m + nu - 1.0) * s ** (m - 2) * k0
        - (2.0 * (m + nu) + 1.0) * s ** (m - 1) * k1
        + s**m * k2
    )
    return val, d1, d2


def lambda_factor(tf: TimeFactor, t: float) -> tuple[float, float]:
    """Return ``(lambda(t), lambda'(t))``."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    s = 1.0 + t
    m = (tf.mu + 1.0) / 2.0
    val, d1, _ = _power_bessel_derivs(m, tf.varsigma, s)
    return val, d1


def lambda_second_derivative(tf: TimeFactor, t: float) -> float:
    return _power_bessel_derivs((tf.mu + 1.0) / 2.0, tf.varsigma, 1.0 + t)[2]


def adjoint_product_solution(tf: TimeFactor, n: int, t: float, x_norm):
    """Separated solution ``lambda(t) phi(x)`` of the adjoint equation."""
    lam, _ = lambda_factor(tf, t)
    return lam * phi_yz(n, x_norm)


def V_weight(mu: float, nusq: float, n: int, t: float, x_norm):
    """``(1+t)^{(mu+1+sqrt d)/2} ((1+t)^2 - |x|^2)^{-(n+sqrt d)/2}`` inside ``|x| < 1+t``."""
    s = 1.0 + t
    r = np.asarray(x_norm, dtype=float)
    if np.any(r >= s):
        raise DomainError("V is only defined for |x| < 1 + t")
    sd = math.sqrt(delta(mu, nusq))
    out = s ** ((mu + 1.0 + sd) / 2.0) * (s * s - r * r) ** (-(n + sd) / 2.0)
    return float(out) if r.ndim == 0 else out


def V_weight_dt(mu: float, nusq: float, n: int, t: float, x_norm):
    """Time derivative of :func:`V_weight`."""
    s = 1.0 + t
    r = np.asarray(x_norm, dtype=float)
    if np.any(r >= s):
        raise DomainError("V is only defined for |x| < 1 + t")
    sd = math.sqrt(delta(mu, nusq))
    alpha = (mu + 1.0 + sd) / 2.0
    kappa = (n + sd) / 2.0
    base = s * s - r * r
    out = alpha * s ** (alpha - 1.0) * base ** (-kappa) - 2.0 * kappa * s ** (alpha + 1.0) * base ** (
        -kappa - 1.0
    )
    return float(out) if r.ndim == 0 else out


@dataclass(frozen=True)
class SelfSimilarParams:
    beta: float
    mu: float
    nusq: float

    def __post_init__(self) -> None:
        d = delta(self.mu, self.nusq)
        if d < 0:
            raise DomainError("self-similar family needs delta >= 0")
        if not self.beta > (math.sqrt(d) + 1.0 - self.mu) / 2.0:
            raise DomainError(
                f"beta={self.beta} must exceed (sqrt(delta)+1-mu)/2={(math.sqrt(d) + 1 - self.mu) / 2}"
            )

    @property
    def sqrt_delta(self) -> float:
        return math.sqrt(delta(self.mu, self.nusq))

    @property
    def a_beta(self) -> float:
        return self.beta / 2.0 + (self.mu - 1.0) / 4.0 + self.sqrt_delta / 4.0

    @property
    def b_beta(self) -> float:
        return self.beta / 2.0 + (self.mu - 1.0) / 4.0 - self.sqrt_delta / 4.0

    def shifted(self, k: float = 1.0) -> "SelfSimilarParams":
        return SelfSimilarParams(self.beta + k, self.mu, self.nusq)


def _similarity_variable(t: float, x_norm) -> tuple[float, np.ndarray]:
    s = 1.0 + t
    z = (np.asarray(x_norm, dtype=float) / s) ** 2
    if np.any(z >= 1.0):
        raise DomainError("self-similar solutions are defined for |x| < 1 + t")
    return s, z


def _hyp_derivs(ss: SelfSimilarParams, n: int, z):
    a, b, c = ss.a_beta, ss.b_beta, n / 2.0
    f0 = hyp2f1(a, b, c, z)
    f1 = (a * b / c) * hyp2f1(a + 1, b + 1, c + 1, z)
    f2 = (a * b / c) * ((a + 1) * (b + 1) / (c + 1)) * hyp2f1(a + 2, b + 2, c + 2, z)
    return f0, f1, f2


def phi_beta(ss: SelfSimilarParams, n: int, t: float, x_norm):
    """``(1+t)^{1-beta} 2F1(a_beta, b_beta; n/2; |x|^2/(1+t)^2)``."""
    s, z = _similarity_variable(t, x_norm)
    return s ** (1.0 - ss.beta) * hyp2f1(ss.a_beta, ss.b_beta, n / 2.0, z)


def phi_beta_dt(ss: SelfSimilarParams, n: int, t: float, x_norm):
    """Time derivative via the parameter-shifted series."""
    s, z = _similarity_variable(t, x_norm)
    a, b = ss.a_beta, ss.b_beta
    return s ** (-ss.beta) * (
        (1.0 - ss.beta) * hyp2f1(a, b, n / 2.0, z)
        - 4.0 * (a * b / n) * z * hyp2f1(a + 1, b + 1, n / 2.0 + 1.0, z)
    )


def phi_beta_adjoint_residual(ss: SelfSimilarParams, n: int, t: float, x_norm):
    """Relative residual of the adjoint equation for ``Phi_beta`` with exact derivatives.

    The residual is divided by the sum of the magnitudes of its terms.
    """
    s, z = _similarity_variable(t, x_norm)
    beta, mu = ss.beta, ss.mu
    f0, f1, f2 = _hyp_derivs(ss, n, z)
    phi = s ** (1.0 - beta) * f0
    g = (1.0 - beta) * f0 - 2.0 * z * f1
    dg = (-1.0 - beta) * f1 - 2.0 * z * f2
    phi_t = s ** (-beta) * g
    phi_tt = s ** (-beta - 1.0) * (-beta * g - 2.0 * z * dg)
    lap = s ** (-beta - 1.0) * (4.0 * z * f2 + 2.0 * n * f1)
    terms = [phi_tt, -lap, -mu * phi_t / s, mu * phi / s**2, ss.nusq * phi / s**2]
    res = sum(terms)
    scale = sum(np.abs(x) for x in terms)
    return np.abs(res) / scale


def adjoint_residual_fd(
    func: Callable[[float, np.ndarray], np.ndarray],
    mu: float,
    nusq: float,
    n: int,
    t: float,
    x_norm,
    rel_step: float = 1e-4,
):
    """Finite-difference relative residual of ``Phi_tt - Lap Phi - d_t(mu Phi/(1+t)) + nu^2 Phi/(1+t)^2``.

    ``func(t, r)`` must be radial. Steps are ``rel_step * (1+t)``.
    """
    h = rel_step * (1.0 + t)
    r = np.atleast_1d(np.asarray(x_norm, dtype=float))
    f = lambda tt, rr: np.asarray(func(tt, rr), dtype=float)  # noqa: E731
    f0 = f(t, r)
    ftp, ftm = f(t + h, r), f(t - h, r)
    phi_t = (ftp - ftm) / (2 * h)
    phi_tt = (ftp - 2 * f0 + ftm) / h**2
    frp, frm = f(t, r + h), f(t, np.abs(r - h))
    f_rr = (frp - 2 * f0 + frm) / h**2
    f_r = (frp - frm) / (2 * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        # below one step f_r / r is pure rounding noise; use its limit f_rr
        lap = np.where(r > h, f_rr + (n - 1) * f_r / np.where(r > h, r, 1.0), n * f_rr)
    s = 1.0 + t
    terms = [phi_tt, -lap, -mu * phi_t / s, mu * f0 / s**2, nusq * f0 / s**2]
    res = np.abs(sum(terms)) / sum(np.abs(x) for x in terms)
    return res if np.ndim(x_norm) else float(res[0])


# --- cutoff -------------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffSpec:
    """``psi_R(t) = psi(t/R)`` with a fixed degree-7 transition on ``[1/2, 1]``."""

    R: float
    profile: str = "poly7"

    def __post_init__(self) -> None:
        if self.R <= 0:
            raise DomainError("cutoff radius must be positive")
        if self.profile != "poly7":
            raise DomainError(f"unknown cutoff profile {self.profile!r}")


class CutoffValues(NamedTuple):
    psi: np.ndarray | float
    psi_star: np.ndarray | float
    dpsi: np.ndarray | float
    d2psi: np.ndarray | float


def _transition(x):
    # P(x) = 1 - (35x^4 - 84x^5 + 70x^6 - 20x^7): P(0)=1, P(1)=0, flat to third order at both ends
    # factored so the value keeps full relative accuracy as x -> 1
    val = (1.0 - x) ** 4 * (1.0 + 4.0 * x + 10.0 * x**2 + 20.0 * x**3)
    d1 = -140.0 * x**3 * (1.0 - x) ** 3
    d2 = -420.0 * x**2 * (1.0 - x) ** 2 * (1.0 - 2.0 * x)
    return val, d1, d2


def cutoff(spec: CutoffSpec, t) -> CutoffValues:
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise DomainError("cutoff is defined for t >= 0")
    s = tt / spec.R
    x = np.clip(2.0 * s - 1.0, 0.0, 1.0)
    pv, p1, p2 = _transition(x)
    inside = (s > 0.5) & (s < 1.0)
    psi = np.where(s <= 0.5, 1.0, np.where(s >= 1.0, 0.0, pv))
    dpsi = np.where(inside, p1 * 2.0 / spec.R, 0.0)
    d2psi = np.where(inside, p2 * 4.0 / spec.R**2, 0.0)
    psi_star = np.where(s >= 0.5, psi, 0.0)
    if tt.ndim == 0:
        return CutoffValues(float(psi), float(psi_star), float(dpsi), float(d2psi))
    return CutoffValues(psi, psi_star, dpsi, d2psi)


def cutoff_bound_constant(spec: CutoffSpec, k: float, order: int = 1, samples: int = 4001) -> float:
    """Smallest ``C`` with ``|d^order psi_R| <= C R^-order (psi*_R)^(1 - order/k)`` on ``[R/2, R)``."""
    t = np.linspace(0.5, 1.0, samples)[:-1] * spec.R
    vals = cutoff(spec, t)
    deriv = np.abs(vals.dpsi if order == 1 else vals.d2psi)
    weight = vals.psi_star ** (1.0 - order / k)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(deriv > 0, deriv * spec.R**order / weight, 0.0)
    return float(np.max(ratio))


# --- space-time integral of Phi_beta^{p'} over [R/2, R] x B_{r0+t} -----------------

_GL16 = np.polynomial.legendre.leggauss(16)
_GL24 = np.polynomial.legendre.leggauss(24)


def _graded_nodes(lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    # geometric panels refining toward lo
    edges = [lo]
    while edges[-1] * 2.0 < hi:
        edges.append(edges[-1] * 2.0)
    edges.append(hi)
    xs, ws = [], []
    gx, gw = _GL16
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * gx + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * gw)
    return np.concatenate(xs), np.concatenate(ws)


def source_integral(ss: SelfSimilarParams, n: int, p: float, r0: float, R: float) -> float:
    """``int_{R/2}^R int_{|x| <= r0+t} Phi_beta^{p'} dx dt`` by tensor Gauss-Legendre.

    The radial integral runs in ``w = 1 - |x|/(1+t)`` on panels graded toward
    the edge ``w = (1-r0)/(1+t)`` where ``Phi_beta`` can be steep.
    """
    if R <= 2:
        raise DomainError("R must exceed 2")
    if not (0 < r0 < 1):
        raise DomainError("r0 must lie in (0, 1)")
    pprime = p / (p - 1.0)
    gx, gw = _GL24
    ts = 0.5 * (R / 2.0) * gx + 0.75 * R
    tw = 0.25 * R * gw
    area = sphere_area(n)
    total = 0.0
    for t, wt in zip(ts, tw):
        s = 1.0 + t
        w, ww = _graded_nodes((1.0 - r0) / s, 1.0)
        r = s * (1.0 - w)
        z = (1.0 - w) ** 2
        res = hyp2f1_series(ss.a_beta, ss.b_beta, n / 2.0, z)
        if np.any(~np.isfinite(res.value)) or np.any(res.value <= 0):
            raise LightConeQuadratureError(f"unusable Phi_beta values near the light cone at t={t:.4g}")
        if np.any(res.terms >= 100_000):
            raise LightConeQuadratureError(
                f"hypergeometric series hit its term cap near the light cone at t={t:.4g}"
            )
        phi = s ** (1.0 - ss.beta) * res.value
        inner = np.sum(ww * s * phi**pprime * r ** (n - 1))
        total += wt * area * inner
    if not math.isfinite(total):
        raise LightConeQuadratureError("non-finite light-cone integral")
    return float(total)


@dataclass(frozen=True)
class SourceGrowthFit:
    case: str  # "power", "power_log" or "power_edge"
    predicted_exponent: float
    R_values: tuple[float, ...]
    integrals: tuple[float, ...]
    fitted_exponents: tuple[float, ...]

    @property
    def log_corrected_exponents(self) -> tuple[float, ...]:
        """Ladder exponents after dividing out a ``log R`` factor."""
        out = []
        for (r_a, i_a), (r_b, i_b) in zip(
            zip(self.R_values, self.integrals), zip(self.R_values[1:], self.integrals[1:])
        ):
            out.append(math.log((i_b / math.log(r_b)) / (i_a / math.log(r_a))) / math.log(r_b / r_a))
        return tuple(out)


def source_integral_growth(
    ss: SelfSimilarParams, n: int, p: float, r0: float, R: float, rungs: int = 3
) -> SourceGrowthFit:
    """Evaluate the integral on ``R, 2R, 4R, ...`` and compare with the predicted growth class."""
    mu = ss.mu
    pprime = p / (p - 1.0)
    edge = (n - mu + 1.0) / 2.0
    if abs(ss.beta - edge) < 1e-12:
        raise DomainError("beta = (n - mu + 1)/2 is excluded")
    threshold = edge + 1.0 - 1.0 / p
    if abs(ss.beta - threshold) <= 1e-12:
        case, kappa = "power_log", -(n - mu - 1.0) / 2.0 * pprime + n
    elif ss.beta < threshold:
        case, kappa = "power", n + 1.0 + (1.0 - ss.beta) * pprime
    else:
        case, kappa = "power_edge", -(n - mu - 1.0) / 2.0 * pprime + n
    Rs = tuple(R * 2.0**k for k in range(rungs))
    vals = tuple(source_integral(ss, n, p, r0, x) for x in Rs)
    fitted = tuple(math.log2(b / a) for a, b in zip(vals, vals[1:]))
    return SourceGrowthFit(case, kappa, Rs, vals, fitted)

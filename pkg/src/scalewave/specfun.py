"""Modified Bessel function K and the Gauss hypergeometric series.

Both are evaluated from their defining representations:

* ``K_s(t) = int_0^inf exp(-t cosh z) cosh(s z) dz`` by the trapezoidal rule,
  which converges geometrically here because the integrand already decays
  double exponentially in ``z``;
* ``2F1(a, b; c; z)`` by direct summation of its power series on ``[0, 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "PoleError",
    "HypergeometricParams",
    "SeriesResult",
    "bessel_k",
    "bessel_k_scaled",
    "bessel_k_derivative",
    "bessel_k_second_derivative",
    "pochhammer",
    "hyp2f1",
    "hyp2f1_series",
]

_LOG_CUTOFF = math.log(1e18)
_Z_MAX = 1.0 - 1e-9
MAX_TERMS = 100_000
_CHUNK = 512
_CHUNK_MAX = 1 << 16
_WORK = 1 << 22


class DomainError(ValueError):
    """Argument outside the domain where the function is defined here."""


class PoleError(DomainError):
    """Lower hypergeometric parameter at a pole (0, -1, -2, ...)."""


def _check_bessel_args(order: float, t: float) -> tuple[float, float]:
    order = float(order)
    t = float(t)
    if not (math.isfinite(order) and math.isfinite(t)):
        raise DomainError(f"non-finite Bessel argument: order={order}, t={t}")
    if t <= 0.0:
        raise DomainError(f"K_s(t) requires t > 0, got t={t}")
    # K_{-s} = K_s: the integrand only sees cosh(s z)
    return abs(order), t


def _log_integrand(z: np.ndarray, order: float, t: float) -> np.ndarray:
    # log of exp(-t (cosh z - 1)) cosh(order z), overflow safe
    sz = order * z
    log_cosh = sz + np.log1p(np.exp(-2.0 * sz)) - math.log(2.0)
    return -t * (np.cosh(z) - 1.0) + log_cosh


def _trapezoid_log(order: float, t: float, h: float, z_end: float) -> tuple[float, float]:
    n = int(math.ceil(z_end / h)) + 1
    z = h * np.arange(n)
    g = _log_integrand(z, order, t)
    gmax = float(g.max())
    w = np.exp(g - gmax)
    w[0] *= 0.5
    return float(h * w.sum()), gmax


def _truncation_point(order: float, t: float) -> float:
    # integrand peaks near sinh(z) = order / t, then falls off like exp(-t cosh z)
    z_peak = math.asinh(order / t) if order > 0 else 0.0
    g_peak = float(_log_integrand(np.array([z_peak]), order, t)[0])
    z = max(z_peak, 0.5)
    step = 0.25
    while float(_log_integrand(np.array([z]), order, t)[0]) > g_peak - _LOG_CUTOFF - 2.0:
        z += step
        step *= 1.25
    return z


def bessel_k_scaled(order: float, t: float) -> float:
    """Return ``exp(t) * K_order(t)``.

    The scaled form stays representable for large ``t`` where ``K`` itself
    underflows.
    """
    order, t = _check_bessel_args(order, t)
    z_end = _truncation_point(order, t)
    h = min(0.25, z_end / 16.0)
    prev, gmax = _trapezoid_log(order, t, h, z_end)
    for _ in range(12):
        h *= 0.5
        cur, gmax_cur = _trapezoid_log(order, t, h, z_end)
        cur *= math.exp(gmax_cur - gmax)
        if abs(cur - prev) <= 1e-15 * abs(cur):
            return cur * math.exp(gmax)
        prev = cur
    return prev * math.exp(gmax)


def bessel_k(order: float, t: float) -> float:
    """Modified Bessel function of the second kind ``K_order(t)`` for real order, ``t > 0``."""
    scaled = bessel_k_scaled(order, t)
    return scaled * math.exp(-float(t))


def bessel_k_derivative(order: float, t: float) -> float:
    """``dK_s/dt = -K_{s+1}(t) + (s/t) K_s(t)``."""
    s, t = _check_bessel_args(order, t)
    return -bessel_k(s + 1.0, t) + (s / t) * bessel_k(s, t)


def bessel_k_second_derivative(order: float, t: float) -> float:
    """Second derivative from the first-derivative identity applied twice."""
    s, t = _check_bessel_args(order, t)
    k0 = bessel_k(s, t)
    k1 = bessel_k(s + 1.0, t)
    k2 = bessel_k(s + 2.0, t)
    dk0 = -k1 + (s / t) * k0
    dk1 = -k2 + ((s + 1.0) / t) * k1
    return -dk1 - (s / t**2) * k0 + (s / t) * dk0


def pochhammer(m: float, k: int) -> float:
    """Rising factorial ``(m)_k = m (m+1) ... (m+k-1)``, with ``(m)_0 = 1``."""
    if k < 0 or int(k) != k:
        raise DomainError(f"Pochhammer index must be a nonnegative integer, got {k}")
    out = 1.0
    for j in range(int(k)):
        out *= m + j
    return out


@dataclass(frozen=True)
class HypergeometricParams:
    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if self.c <= 0 and float(self.c).is_integer():
            raise PoleError(f"c={self.c} is a nonpositive integer")

    @property
    def excess(self) -> float:
        """``c - a - b``; sets the behaviour of the series as z -> 1."""
        return self.c - self.a - self.b


@dataclass(frozen=True)
class SeriesResult:
    value: float | np.ndarray
    terms: int | np.ndarray
    degraded: bool | np.ndarray


def hyp2f1_series(
    a: float,
    b: float,
    c: float,
    z: float | np.ndarray,
    max_terms: int = MAX_TERMS,
) -> SeriesResult:
    """Sum ``sum_k (a)_k (b)_k / (c)_k z^k / k!`` for ``z`` in ``[0, 1 - 1e-9]``.

    Summation stops once three consecutive terms fall below ``1e-16`` of the
    partial sum, or after ``max_terms`` terms. ``degraded`` marks entries that
    hit the term cap or sit in the slowly convergent corner ``z > 0.9`` with
    ``c - a - b <= 0.05``.
    """
    params = HypergeometricParams(float(a), float(b), float(c))
    zarr = np.asarray(z, dtype=float)
    scalar = zarr.ndim == 0
    zv = np.atleast_1d(zarr).ravel()
    if np.any(~np.isfinite(zv)) or np.any(zv < 0.0) or np.any(zv > _Z_MAX):
        raise DomainError("hyp2f1 series needs 0 <= z <= 1 - 1e-9")

    total = np.ones_like(zv)
    last = np.ones_like(zv)  # most recent term
    tail = np.zeros((zv.size, 2), dtype=bool)  # were the last two terms tiny
    used = np.ones(zv.shape, dtype=int)
    active = np.ones(zv.shape, dtype=bool)
    k0 = 0
    chunk = _CHUNK
    # the leading 1 counts as a term, so at most max_terms - 1 ratios are applied
    while np.any(active) and k0 < max_terms - 1:
        kk = np.arange(k0, min(k0 + chunk, max_terms - 1), dtype=float)
        ratio = (params.a + kk) * (params.b + kk) / ((params.c + kk) * (kk + 1.0))
        idx = np.flatnonzero(active)
        zs = zv[idx]
        with np.errstate(over="ignore", invalid="ignore"):
            terms = last[idx, None] * np.cumprod(ratio[None, :] * zs[:, None], axis=1)
        partial = total[idx, None] + np.cumsum(terms, axis=1)
        tiny = np.abs(terms) <= 1e-16 * np.abs(partial)
        ext = np.concatenate([tail[idx], tiny], axis=1)
        triple = ext[:, 2:] & ext[:, 1:-1] & ext[:, :-2]
        done = triple.any(axis=1)
        cut = np.where(done, triple.argmax(axis=1), terms.shape[1] - 1)
        rows = np.arange(idx.size)
        total[idx] = partial[rows, cut]
        last[idx] = terms[rows, cut]
        used[idx] += cut + 1
        tail[idx] = ext[:, -2:]
        active[idx[done]] = False
        k0 += kk.size
        # long tails near z = 1: widen the chunk while keeping the work array bounded
        chunk = int(min(2 * chunk, max(_CHUNK, _WORK // max(1, int(active.sum()))), _CHUNK_MAX))

    degraded = active | ((zv > 0.9) & (params.excess <= 0.05))
    if scalar:
        return SeriesResult(float(total[0]), int(used[0]), bool(degraded[0]))
    shape = zarr.shape
    return SeriesResult(total.reshape(shape), used.reshape(shape), degraded.reshape(shape))


def hyp2f1(a: float, b: float, c: float, z: float | np.ndarray, max_terms: int = MAX_TERMS):
    """Gauss hypergeometric function on ``[0, 1)``; value only (see :func:`hyp2f1_series`)."""
    return hyp2f1_series(a, b, c, z, max_terms=max_terms).value

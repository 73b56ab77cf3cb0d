"""Iteration machinery for the subcritical blow-up argument.

The lower bounds ``U(t) >= D_j (1+t)^{-a_j} (t-T0)^{b_j}`` and
``V(t) >= Delta_j (1+t)^{-alpha_j} (t-T0)^{beta_j}`` are generated by coupled
recurrences. Exponent sequences are kept in exact rational arithmetic when the
inputs are rational; ``D_j`` and ``Delta_j`` are tracked through their logs.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

from .model import F, ParameterError, SystemParams, roots

__all__ = [
    "BitBudgetWarning",
    "RegimeError",
    "IterationInputs",
    "IterationConstants",
    "IterationRow",
    "IterationTable",
    "ThresholdReport",
    "ball_volume",
    "constants",
    "sequences_recurrence",
    "sequences_closed_form",
    "summation_identities",
    "summation_bruteforce",
    "exponent_gap",
    "lower_bound_envelope",
    "divergence_time",
    "j0",
    "blowup_thresholds",
    "recurrence_battery",
    "F_branch_sign_agrees",
]

BIT_BUDGET = 4096


class BitBudgetWarning(RuntimeWarning):
    """Exact rationals outgrew the bit budget; the table continued in floats."""


class RegimeError(ValueError):
    """No subcritical branch is available for a lifespan prediction."""


def ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _rational(x) -> Fraction:
    if isinstance(x, Rational):
        return Fraction(x)
    # the decimal the user wrote, not the binary expansion of the float
    return Fraction(repr(float(x)))


def _exact_sqrt(x: Fraction) -> Fraction | None:
    if x < 0:
        return None
    num, den = x.numerator, x.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


@dataclass(frozen=True)
class IterationInputs:
    """Numbers the exponent recurrences depend on.

    Fields may be :class:`fractions.Fraction` (exact mode) or float.
    """

    n: int
    mu1: Fraction | float
    mu2: Fraction | float
    p: Fraction | float
    q: Fraction | float
    r2: Fraction | float
    rho2: Fraction | float

    @property
    def exact(self) -> bool:
        return all(isinstance(getattr(self, f), Fraction) for f in ("mu1", "mu2", "p", "q", "r2", "rho2"))

    @property
    def pq(self):
        return self.p * self.q

    @classmethod
    def from_params(cls, params: SystemParams, exact: bool = True) -> "IterationInputs":
        """Build inputs, staying exact when every quantity is rational."""
        rp = roots(params)
        if exact:
            mu1, mu2 = _rational(params.mu1), _rational(params.mu2)
            d1 = (mu1 - 1) ** 2 - 4 * _rational(params.nu1sq)
            d2 = (mu2 - 1) ** 2 - 4 * _rational(params.nu2sq)
            s1, s2 = _exact_sqrt(d1), _exact_sqrt(d2)
            if s1 is not None and s2 is not None:
                return cls(
                    n=params.n,
                    mu1=mu1,
                    mu2=mu2,
                    p=_rational(params.p),
                    q=_rational(params.q),
                    r2=(mu1 - 1 + s1) / 2,
                    rho2=(mu2 - 1 + s2) / 2,
                )
            warnings.warn("irrational square root of delta; using float arithmetic", BitBudgetWarning)
        return cls(
            n=params.n,
            mu1=float(params.mu1),
            mu2=float(params.mu2),
            p=float(params.p),
            q=float(params.q),
            r2=rp.r2,
            rho2=rp.rho2,
        )

    def as_float(self) -> "IterationInputs":
        return IterationInputs(
            self.n, float(self.mu1), float(self.mu2), float(self.p), float(self.q), float(self.r2), float(self.rho2)
        )


@dataclass(frozen=True)
class IterationConstants:
    A: Fraction | float
    A_tilde: Fraction | float
    B: Fraction | float
    B_tilde: Fraction | float
    B0: Fraction | float
    B0_tilde: Fraction | float
    a1: Fraction | float
    b1: Fraction | float
    alpha1: Fraction | float
    beta1: Fraction | float
    C0: float
    K0: float
    log_C_tilde: float
    log_K_tilde: float
    Spq_inf: float
    Spq_inf_tilde: float

    @property
    def C_tilde(self) -> float:
        return math.exp(self.log_C_tilde)

    @property
    def K_tilde(self) -> float:
        return math.exp(self.log_K_tilde)


def _seeds(inp: IterationInputs):
    n, p, q = inp.n, inp.p, inp.q
    half = Fraction(1, 2) if inp.exact else 0.5
    a1 = inp.r2 + 1 + (n + inp.mu2 - 1) * p * half
    b1 = inp.r2 + n + 2
    alpha1 = inp.rho2 + 1 + (n + inp.mu1 - 1) * q * half
    beta1 = inp.rho2 + n + 2
    return a1, b1, alpha1, beta1


def constants(inp: IterationInputs | SystemParams, support_radius: float = 1.0) -> IterationConstants:
    """Constants of the iteration.

    ``support_radius`` is the ``R`` in ``C0 = |B_1|^{1-p} R^{-n(p-1)}``;
    the solution lives in ``|x| <= R + t`` and ``R = 1`` covers every ``r0 <= 1``.
    """
    if isinstance(inp, SystemParams):
        inp = IterationInputs.from_params(inp)
    n, p, q, r2, rho2 = inp.n, inp.p, inp.q, inp.r2, inp.rho2
    pq = p * q
    if not pq > 1:
        raise ParameterError("pq must exceed 1")
    a1, b1, alpha1, beta1 = _seeds(inp)
    A = r2 + 1 - n + (rho2 + 1) * p + n * pq
    A_t = rho2 + 1 - n + (r2 + 1) * q + n * pq
    B = r2 + 3 + (rho2 + 3) * p
    B_t = rho2 + 3 + (r2 + 3) * q
    B0 = B / (pq - 1) + b1
    B0_t = B_t / (pq - 1) + beta1
    if not (B0 > 0 and B0_t > 0):
        raise AssertionError(f"B0={B0}, B0_tilde={B0_t} must be positive")
    pf, qf, pqf = float(p), float(q), float(pq)
    vol = ball_volume(n)
    log_C0 = (1 - pf) * math.log(vol) - n * (pf - 1) * math.log(support_radius)
    log_K0 = (1 - qf) * math.log(vol) - n * (qf - 1) * math.log(support_radius)
    log_Ct = log_C0 + pf * log_K0 - 2 * (pf + 1) * math.log(float(B0))
    log_Kt = log_K0 + qf * log_C0 - 2 * (qf + 1) * math.log(float(B0_t))
    S = 2 * pqf * (pf + 1) / (pqf - 1) ** 2 * math.log(pqf) - log_Ct / (pqf - 1)
    S_t = 2 * pqf * (qf + 1) / (pqf - 1) ** 2 * math.log(pqf) - log_Kt / (pqf - 1)
    return IterationConstants(
        A=A,
        A_tilde=A_t,
        B=B,
        B_tilde=B_t,
        B0=B0,
        B0_tilde=B0_t,
        a1=a1,
        b1=b1,
        alpha1=alpha1,
        beta1=beta1,
        C0=math.exp(log_C0),
        K0=math.exp(log_K0),
        log_C_tilde=log_Ct,
        log_K_tilde=log_Kt,
        Spq_inf=S,
        Spq_inf_tilde=S_t,
    )


@dataclass(frozen=True)
class IterationRow:
    j: int
    a: Fraction | float
    b: Fraction | float
    alpha: Fraction | float
    beta: Fraction | float
    log_D: float
    log_Delta: float


@dataclass
class IterationTable:
    rows: list[IterationRow]
    exact: bool
    fell_back_at: int | None = None  # first j computed in floats after a budget overflow
    inputs: IterationInputs | None = field(default=None, repr=False)

    def row(self, j: int) -> IterationRow:
        if j < 1 or j > len(self.rows):
            raise KeyError(j)
        return self.rows[j - 1]

    def odd_rows(self) -> list[IterationRow]:
        return [r for r in self.rows if r.j % 2 == 1]

    def to_csv(self, odd_only: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "a_j", "b_j", "alpha_j", "beta_j", "log_D_j", "log_Delta_j"])
        for r in self.odd_rows() if odd_only else self.rows:
            w.writerow([r.j, _fmt(r.a), _fmt(r.b), _fmt(r.alpha), _fmt(r.beta), repr(r.log_D), repr(r.log_Delta)])
        return buf.getvalue()


def _fmt(x) -> str:
    return str(x) if isinstance(x, Fraction) else repr(float(x))


def _too_big(*xs) -> bool:
    for x in xs:
        if isinstance(x, Fraction) and max(x.numerator.bit_length(), x.denominator.bit_length()) > BIT_BUDGET:
            return True
    return False


def sequences_recurrence(
    inp: IterationInputs | SystemParams,
    j_max: int,
    C1: float = 1.0,
    K1: float = 1.0,
    eps: float | None = None,
    support_radius: float = 1.0,
) -> IterationTable:
    """Iterate the coupled recurrences literally from the ``j = 1`` seeds.

    ``D_1 = K1 eps^p / ((r2+n+1)(r2+n+2))`` and ``Delta_1 = C1 eps^q / ((rho2+n+1)(rho2+n+2))``.
    ``eps`` defaults to the value stored in ``SystemParams`` (or 1).
    """
    if isinstance(inp, SystemParams):
        eps = inp.eps if eps is None else eps
        inp = IterationInputs.from_params(inp)
    eps = 1.0 if eps is None else eps
    if j_max < 1 or j_max % 2 == 0:
        raise ValueError("j_max must be an odd integer >= 1")
    consts = constants(inp, support_radius)
    n, p, q, r2, rho2 = inp.n, inp.p, inp.q, inp.r2, inp.rho2
    pf, qf = float(p), float(q)
    a, b, alpha, beta = consts.a1, consts.b1, consts.alpha1, consts.beta1
    r2f, rho2f = float(r2), float(rho2)
    log_D = math.log(K1) + pf * math.log(eps) - math.log((r2f + n + 1) * (r2f + n + 2))
    log_Dl = math.log(C1) + qf * math.log(eps) - math.log((rho2f + n + 1) * (rho2f + n + 2))
    log_C0, log_K0 = math.log(consts.C0), math.log(consts.K0)
    exact = inp.exact
    fell_back = None
    rows = [IterationRow(1, a, b, alpha, beta, log_D, log_Dl)]
    for j in range(1, j_max):
        bf, betaf = float(b), float(beta)
        nlog_D = log_C0 + pf * log_Dl - math.log((r2f + 2 + betaf * pf) * (r2f + 3 + betaf * pf))
        nlog_Dl = log_K0 + qf * log_D - math.log((rho2f + 2 + bf * qf) * (rho2f + 3 + bf * qf))
        na = r2 + 1 + n * (p - 1) + alpha * p
        nb = r2 + 3 + beta * p
        nalpha = rho2 + 1 + n * (q - 1) + a * q
        nbeta = rho2 + 3 + b * q
        if exact and _too_big(na, nb, nalpha, nbeta):
            warnings.warn(
                f"exact rationals exceed {BIT_BUDGET} bits at j={j + 1}; continuing in floats",
                BitBudgetWarning,
            )
            exact, fell_back = False, j + 1
            p, q, r2, rho2 = pf, qf, r2f, rho2f
            a, b, alpha, beta = float(a), float(b), float(alpha), float(beta)
            na = r2 + 1 + n * (p - 1) + alpha * p
            nb = r2 + 3 + beta * p
            nalpha = rho2 + 1 + n * (q - 1) + a * q
            nbeta = rho2 + 3 + b * q
        a, b, alpha, beta, log_D, log_Dl = na, nb, nalpha, nbeta, nlog_D, nlog_Dl
        rows.append(IterationRow(j + 1, a, b, alpha, beta, log_D, log_Dl))
    return IterationTable(rows=rows, exact=inp.exact and fell_back is None, fell_back_at=fell_back, inputs=inp)


def sequences_closed_form(inp: IterationInputs | SystemParams, j: int):
    """``(a_j, alpha_j, b_j, beta_j)`` for odd ``j`` from ``x_j = (X/(pq-1) + x_1)(pq)^{(j-1)/2} - X/(pq-1)``."""
    if isinstance(inp, SystemParams):
        inp = IterationInputs.from_params(inp)
    if j < 1 or j % 2 == 0:
        raise ValueError("closed forms hold for odd j >= 1")
    c = constants(inp)
    pq = inp.pq
    g = pq ** ((j - 1) // 2)

    def closed(X, x1):
        return (X / (pq - 1) + x1) * g - X / (pq - 1)

    return (
        closed(c.A, c.a1),
        closed(c.A_tilde, c.alpha1),
        closed(c.B, c.b1),
        closed(c.B_tilde, c.beta1),
    )


def summation_identities(pq, j: int):
    """Closed forms of ``sum_{k=0}^{(j-3)/2} (pq)^k`` and ``sum_{k=1}^{(j-1)/2} (j+1-2k)(pq)^{k-1}``."""
    if j < 3 or j % 2 == 0:
        raise ValueError("j must be odd and >= 3")
    if not pq > 1:
        raise ValueError("pq must exceed 1")
    m = (j - 1) // 2
    geometric = (pq**m - 1) / (pq - 1)
    weighted = (2 * pq * geometric - j + 1) / (pq - 1)
    return geometric, weighted


def summation_bruteforce(pq, j: int):
    m = (j - 1) // 2
    geometric = sum(pq**k for k in range(0, m))
    weighted = sum((j + 1 - 2 * k) * pq ** (k - 1) for k in range(1, m + 1))
    return geometric, weighted


def exponent_gap(inp: IterationInputs | SystemParams, tilde: bool = False):
    """``(B-A)/(pq-1) + b1 - a1`` (or its tilde analogue), the power of ``t - T0`` in ``J(t)``."""
    if isinstance(inp, SystemParams):
        inp = IterationInputs.from_params(inp)
    c = constants(inp)
    pq = inp.pq
    if tilde:
        return (c.B_tilde - c.A_tilde) / (pq - 1) + c.beta1 - c.alpha1
    return (c.B - c.A) / (pq - 1) + c.b1 - c.a1


def lower_bound_envelope(table: IterationTable, t: float, T0: float = 1.0, odd_only: bool = True):
    """``log`` of ``D_j (1+t)^{-a_j} (t-T0)^{b_j}`` and the ``V`` analogue for each stored ``j``.

    Returns a list of ``(j, log_U_lb, log_V_lb)``.
    """
    if not t > T0:
        raise ValueError("envelope needs t > T0")
    l1, l2 = math.log1p(t), math.log(t - T0)
    out = []
    for r in table.odd_rows() if odd_only else table.rows:
        out.append(
            (
                r.j,
                r.log_D - float(r.a) * l1 + float(r.b) * l2,
                r.log_Delta - float(r.alpha) * l1 + float(r.beta) * l2,
            )
        )
    return out


def divergence_time(table: IterationTable, T0: float = 1.0, component: str = "U") -> float:
    """Time past which the last stored envelope exceeds 1, i.e. ``log`` lower bound crosses 0.

    For large ``j`` this approximates the time after which the envelopes diverge.
    """
    last = table.odd_rows()[-1]
    if component == "U":
        logc, a, b = last.log_D, float(last.a), float(last.b)
    else:
        logc, a, b = last.log_Delta, float(last.alpha), float(last.beta)

    def g(t):
        return logc - a * math.log1p(t) + b * math.log(t - T0)

    if b <= a:
        return math.inf
    lo, hi = T0 + 1e-12, T0 + 1.0
    while g(hi) <= 0:
        hi = T0 + 2 * (hi - T0)
        if hi > 1e300:
            return math.inf
    if g(lo) > 0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


def j0(inp: IterationInputs | SystemParams, support_radius: float = 1.0) -> int:
    """Smallest index beyond which ``log D_j >= (pq)^{(j-1)/2}(log D_1 - S)`` is guaranteed.

    Uses ``ceil(max(log C~/(p+1), log K~/(q+1)) / log(pq) - 2pq/(pq-1) + 1)``.
    """
    if isinstance(inp, SystemParams):
        inp = IterationInputs.from_params(inp)
    c = constants(inp, support_radius)
    p, q = float(inp.p), float(inp.q)
    pq = p * q
    val = max(c.log_C_tilde / (p + 1), c.log_K_tilde / (q + 1)) / math.log(pq) - 2 * pq / (pq - 1) + 1
    return math.ceil(val)


@dataclass(frozen=True)
class ThresholdReport:
    E: float | None  # u branch, needs F(n+mu2,q,p) > 0
    E_tilde: float | None  # v branch, needs F(n+mu1,p,q) > 0
    T_u: float | None  # 2 E eps^{-1/F2}
    T_v: float | None  # 2 E~ eps^{-1/F1}
    active: str  # "u" or "v": branch with the larger F
    T_pred: float
    eps0_feasible: bool  # 2 E eps^{-1/F} > 2 T0 + 1 on the active branch

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def blowup_thresholds(
    params: SystemParams, C1: float = 1.0, K1: float = 1.0, T0: float = 1.0, support_radius: float = 1.0
) -> ThresholdReport:
    F1, F2 = params.F1, params.F2
    if not (F1 > 0 or F2 > 0):
        raise RegimeError("thresholds need F(n+mu1,p,q) > 0 or F(n+mu2,q,p) > 0")
    inp = IterationInputs.from_params(params, exact=False)
    c = constants(inp, support_radius)
    p, q, n = params.p, params.q, params.n
    pq = p * q
    r2, rho2 = float(inp.r2), float(inp.rho2)
    E = Et = Tu = Tv = None
    if F2 > 0:
        K2 = K1 / ((r2 + n + 1) * (r2 + n + 2))
        log_inner = (float(c.A) / (pq - 1) + float(c.a1)) * math.log(2.0) + c.Spq_inf - math.log(K2)
        E = math.exp(log_inner / (p * F2))
        Tu = 2.0 * E * params.eps ** (-1.0 / F2)
    if F1 > 0:
        C2 = C1 / ((rho2 + n + 1) * (rho2 + n + 2))
        log_inner = (float(c.A_tilde) / (pq - 1) + float(c.alpha1)) * math.log(2.0) + c.Spq_inf_tilde - math.log(C2)
        Et = math.exp(log_inner / (q * F1))
        Tv = 2.0 * Et * params.eps ** (-1.0 / F1)
    active = "u" if F2 >= F1 else "v"
    T_pred = Tu if active == "u" else Tv
    return ThresholdReport(E, Et, Tu, Tv, active, T_pred, T_pred > 2 * T0 + 1)


def recurrence_battery(draws: Sequence[IterationInputs], j_max: int = 25) -> list[tuple[IterationInputs, int, bool]]:
    """Compare recurrence and closed forms at every odd ``j <= j_max`` for each input.

    Returns ``(inputs, j, equal)`` entries; equality is exact for rational inputs.
    """
    out = []
    for inp in draws:
        table = sequences_recurrence(inp, j_max)
        for r in table.odd_rows():
            a, alpha, b, beta = sequences_closed_form(inp, r.j)
            if table.exact:
                ok = (a, alpha, b, beta) == (r.a, r.alpha, r.b, r.beta)
            else:
                ok = all(
                    abs(float(x) - float(y)) <= 1e-10 * max(1.0, abs(float(y)))
                    for x, y in zip((a, alpha, b, beta), (r.a, r.alpha, r.b, r.beta))
                )
            out.append((inp, r.j, ok))
    return out


def F_branch_sign_agrees(inp: IterationInputs) -> tuple[bool, bool]:
    """Sign of the exponent gaps versus the matching ``F`` values."""
    fi = inp.as_float()
    F2 = F(fi.n + fi.mu2, fi.q, fi.p)
    F1 = F(fi.n + fi.mu1, fi.p, fi.q)
    g = float(exponent_gap(inp))
    gt = float(exponent_gap(inp, tilde=True))
    return (math.copysign(1, g) == math.copysign(1, F2), math.copysign(1, gt) == math.copysign(1, F1))

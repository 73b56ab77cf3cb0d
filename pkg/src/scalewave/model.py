"""Parameters of the coupled system, regime classification and lifespan laws.

The system is::

    u_tt - Lap u + mu1/(1+t) u_t + nu1sq/(1+t)^2 u = |v|^p
    v_tt - Lap v + mu2/(1+t) v_t + nu2sq/(1+t)^2 v = |u|^q

with data ``eps * (u0, u1, v0, v1)`` supported in the ball of radius ``r0``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ParameterError",
    "SystemParams",
    "RootPairs",
    "Regime",
    "CriticalSubcase",
    "LawKind",
    "LifespanLaw",
    "RegimeReport",
    "delta",
    "F",
    "strauss_exponent",
    "roots",
    "classify",
    "pq_grid",
    "swap_components",
]

DEFAULT_TOL = 1e-12


class ParameterError(ValueError):
    """Parameters violate an invariant of the model."""


def delta(mu: float, nusq: float) -> float:
    """Discriminant ``(mu - 1)^2 - 4 nu^2``."""
    return (mu - 1.0) ** 2 - 4.0 * nusq


def F(d: float, p: float, q: float) -> float:
    """``(p + 2 + 1/q)/(pq - 1) - (d - 1)/2``.

    Called with the shifted dimension ``d = n + mu_j``.
    """
    return (p + 2.0 + 1.0 / q) / (p * q - 1.0) - (d - 1.0) / 2.0


def strauss_exponent(d: float) -> float:
    """Positive root of ``(d-1) p^2 - (d+1) p - 2 = 0`` (``+inf`` for ``d <= 1``)."""
    if d <= 1.0:
        return math.inf
    a, b, c = d - 1.0, -(d + 1.0), -2.0
    return (-b + math.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)


@dataclass(frozen=True)
class SystemParams:
    n: int
    mu1: float = 0.0
    mu2: float = 0.0
    nu1sq: float = 0.0
    nu2sq: float = 0.0
    p: float = 2.0
    q: float = 2.0
    r0: float = 0.5
    eps: float = 1.0

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        for name in ("mu1", "mu2", "nu1sq", "nu2sq"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative")
        if not (self.p > 1 and self.q > 1):
            raise ParameterError(f"need p, q > 1, got p={self.p}, q={self.q}")
        if not (0 < self.r0 <= 1):
            raise ParameterError(f"r0 must lie in (0, 1], got {self.r0}")
        if self.eps <= 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")
        if self.delta1 < 0 or self.delta2 < 0:
            raise ParameterError(
                f"delta_1={self.delta1:.6g}, delta_2={self.delta2:.6g}; both must be >= 0"
            )

    @property
    def delta1(self) -> float:
        return delta(self.mu1, self.nu1sq)

    @property
    def delta2(self) -> float:
        return delta(self.mu2, self.nu2sq)

    @property
    def F1(self) -> float:
        return F(self.n + self.mu1, self.p, self.q)

    @property
    def F2(self) -> float:
        return F(self.n + self.mu2, self.q, self.p)

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


def swap_components(params: SystemParams) -> SystemParams:
    """Exchange the roles of ``u`` and ``v``."""
    return replace(
        params,
        mu1=params.mu2,
        mu2=params.mu1,
        nu1sq=params.nu2sq,
        nu2sq=params.nu1sq,
        p=params.q,
        q=params.p,
    )


@dataclass(frozen=True)
class RootPairs:
    r1: float
    r2: float
    rho1: float
    rho2: float


def roots(params: SystemParams) -> RootPairs:
    """Roots of ``r^2 - (mu1-1) r + nu1^2`` and ``rho^2 - (mu2-1) rho + nu2^2``."""
    d1, d2 = params.delta1, params.delta2
    if d1 < 0 or d2 < 0:
        raise ParameterError("complex roots: delta must be nonnegative")
    s1, s2 = math.sqrt(d1), math.sqrt(d2)
    rp = RootPairs(
        r1=(params.mu1 - 1.0 - s1) / 2.0,
        r2=(params.mu1 - 1.0 + s1) / 2.0,
        rho1=(params.mu2 - 1.0 - s2) / 2.0,
        rho2=(params.mu2 - 1.0 + s2) / 2.0,
    )
    # r1 + 1 = (mu1 + 1 - sqrt(delta1))/2 vanishes exactly when mu1 = nu1 = 0
    if rp.r2 + 1.0 <= 0.0 or rp.rho2 + 1.0 <= 0.0 or min(rp.r1, rp.rho1) + 1.0 < 0.0:
        raise ParameterError(f"need r2 + 1 > 0, rho2 + 1 > 0 and r1 + 1, rho1 + 1 >= 0: {rp}")
    return rp


class Regime(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"


class CriticalSubcase(str, enum.Enum):
    FIRST_BRANCH = "FirstBranch"  # 0 = F1 > F2
    SECOND_BRANCH = "SecondBranch"  # 0 = F2 > F1
    BOTH_BRANCHES = "BothBranches"  # F1 = F2 = 0
    SYMMETRIC_SAME_PDO = "SymmetricSamePDO"  # F1 = F2 = 0, same coefficients, p = q


class LawKind(str, enum.Enum):
    POLYNOMIAL = "Polynomial"
    EXPONENTIAL = "Exponential"
    NO_PREDICTION = "NoPrediction"


@dataclass(frozen=True)
class LifespanLaw:
    """``T <= C eps^-exponent`` (polynomial) or ``T <= exp(C eps^-exponent)``."""

    kind: LawKind
    exponent: float = math.nan

    def describe(self) -> str:
        if self.kind is LawKind.POLYNOMIAL:
            return f"T <~ eps^(-{self.exponent:.6g})"
        if self.kind is LawKind.EXPONENTIAL:
            return f"T <~ exp(C eps^(-{self.exponent:.6g}))"
        return "no prediction (global existence in this range is an open problem)"


@dataclass(frozen=True)
class RegimeReport:
    F1: float
    F2: float
    regime: Regime
    lifespan_law: LifespanLaw
    technical_ok: bool
    critical_subcase: CriticalSubcase | None = None
    parabolic_curve_value: float | None = None
    delta1: float = field(default=math.nan)
    delta2: float = field(default=math.nan)

    def to_dict(self) -> dict:
        return {
            "F1": self.F1,
            "F2": self.F2,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "regime": self.regime.value,
            "critical_subcase": None if self.critical_subcase is None else self.critical_subcase.value,
            "technical_ok": self.technical_ok,
            "parabolic_curve_value": self.parabolic_curve_value,
            "lifespan_law": {
                "kind": self.lifespan_law.kind.value,
                "exponent": None if math.isnan(self.lifespan_law.exponent) else self.lifespan_law.exponent,
            },
        }


def _parabolic_curve_value(params: SystemParams) -> float | None:
    """Left side of the max-condition for large discriminants, minus ``n/2``.

    Only reported when both discriminants are at least ``(n+1)^2``.
    """
    bound = (params.n + 1.0) ** 2
    if params.delta1 < bound or params.delta2 < bound:
        return None
    p, q = params.p, params.q
    s1 = (params.mu1 - 1.0) / 2.0 - math.sqrt(params.delta1) / 2.0
    s2 = (params.mu2 - 1.0) / 2.0 - math.sqrt(params.delta2) / 2.0
    lhs = max((p + 1.0) / (p * q - 1.0) - s1 / 2.0, (q + 1.0) / (p * q - 1.0) - s2 / 2.0)
    return lhs - params.n / 2.0


def _technical_ok(params: SystemParams) -> bool:
    n = params.n
    return (1.0 / params.p < (n - math.sqrt(params.delta2)) / 2.0) and (
        1.0 / params.q < (n - math.sqrt(params.delta1)) / 2.0
    )


def classify(params: SystemParams, tol: float = DEFAULT_TOL) -> RegimeReport:
    """Classify ``(p, q)`` against the shifted critical curve and attach the lifespan law."""
    F1, F2 = params.F1, params.F2
    top = max(F1, F2)
    p, q = params.p, params.q
    subcase = None
    if top > tol:
        regime = Regime.SUBCRITICAL
        law = LifespanLaw(LawKind.POLYNOMIAL, 1.0 / top)
    elif abs(top) <= tol:
        regime = Regime.CRITICAL
        z1, z2 = abs(F1) <= tol, abs(F2) <= tol
        same_op = params.mu1 == params.mu2 and params.nu1sq == params.nu2sq
        if z1 and z2:
            if same_op and abs(p - q) <= max(tol, 1e-12) * max(p, q):
                subcase, gamma = CriticalSubcase.SYMMETRIC_SAME_PDO, p * (p - 1.0)
            else:
                subcase, gamma = CriticalSubcase.BOTH_BRANCHES, p * q - 1.0
        elif z1:
            subcase, gamma = CriticalSubcase.FIRST_BRANCH, q * (p * q - 1.0)
        else:
            subcase, gamma = CriticalSubcase.SECOND_BRANCH, p * (p * q - 1.0)
        law = LifespanLaw(LawKind.EXPONENTIAL, gamma)
    else:
        regime = Regime.SUPERCRITICAL
        law = LifespanLaw(LawKind.NO_PREDICTION)
    return RegimeReport(
        F1=F1,
        F2=F2,
        regime=regime,
        lifespan_law=law,
        technical_ok=_technical_ok(params),
        critical_subcase=subcase,
        parabolic_curve_value=_parabolic_curve_value(params),
        delta1=params.delta1,
        delta2=params.delta2,
    )


def pq_grid(
    template: SystemParams,
    p_range: tuple[float, float],
    q_range: tuple[float, float],
    steps: int | tuple[int, int],
    tol: float = DEFAULT_TOL,
) -> list[list[RegimeReport]]:
    """Row-major grid of reports: ``grid[i][j]`` is at ``(p_values[i], q_values[j])``."""
    sp, sq = (steps, steps) if isinstance(steps, int) else steps
    if sp < 1 or sq < 1:
        raise ParameterError("steps must be positive")
    if min(p_range) <= 1 or min(q_range) <= 1:
        raise ParameterError("p and q ranges must lie in (1, inf)")
    ps = grid_axis(p_range, sp)
    qs = grid_axis(q_range, sq)
    return [[classify(template.with_(p=float(p), q=float(q)), tol) for q in qs] for p in ps]


def grid_axis(bounds: tuple[float, float], steps: int) -> np.ndarray:
    if steps == 1:
        return np.array([float(bounds[0])])
    return np.linspace(float(bounds[0]), float(bounds[1]), steps)

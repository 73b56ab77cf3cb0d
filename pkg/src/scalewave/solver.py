"""Radial finite-difference solver for the coupled damped wave system.

Nodes sit at ``r_i = i dr`` for ``i = 0..nr`` with a homogeneous Dirichlet
condition at ``r_max``. Time stepping is three-level leapfrog with the damping
term averaged over the two outer levels, so each node needs only a scalar
division.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.special import beta as beta_fn

from .model import ParameterError, SystemParams, roots
from .testfunc import CutoffSpec, TimeFactor, cutoff, lambda_factor, phi_yz, sphere_area

__all__ = [
    "GridSpec",
    "InitialData",
    "FieldState",
    "History",
    "LifespanRecord",
    "SignConditionError",
    "init",
    "init_from_arrays",
    "step",
    "simulate",
    "run_lifespan",
    "radial_integral",
    "functionals",
    "bump_integral",
    "density_weight",
    "y_functional",
    "YResult",
]

log = logging.getLogger(__name__)

Forcing = Callable[[float, np.ndarray], np.ndarray]


class SignConditionError(ParameterError):
    """Initial data violate the positivity assumptions behind the blow-up argument."""


@dataclass(frozen=True)
class GridSpec:
    r_max: float
    nr: int
    t_max: float
    cfl: float = 0.9
    refine_levels: int = 1

    def __post_init__(self) -> None:
        if self.r_max <= 0 or self.t_max <= 0:
            raise ParameterError("r_max and t_max must be positive")
        if int(self.nr) != self.nr or self.nr < 4:
            raise ParameterError("nr must be an integer >= 4")
        if not (0 < self.cfl <= 0.95):
            raise ParameterError("cfl must lie in (0, 0.95]")
        if self.refine_levels < 1:
            raise ParameterError("refine_levels must be >= 1")

    @property
    def dr(self) -> float:
        return self.r_max / self.nr

    @property
    def dt(self) -> float:
        return self.cfl * self.dr

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.nr + 1)

    def check_light_cone(self, r0: float) -> None:
        if self.r_max < r0 + self.t_max + 2 * self.dr:
            raise ParameterError(
                f"r_max={self.r_max} must be >= r0 + t_max + 2 dr = {r0 + self.t_max + 2 * self.dr}"
            )

    def refined(self, level: int) -> "GridSpec":
        return replace(self, nr=self.nr * 2**level)


@dataclass(frozen=True)
class InitialData:
    """``eps * c * (1 - (r/r0)^2)^k`` bumps for each of ``u0, u1, v0, v1``."""

    cu0: float = 1.0
    cu1: float = 1.0
    cv0: float = 1.0
    cv1: float = 1.0
    r0: float = 0.5
    k: int = 4
    shape: str = "PolyBump"

    def __post_init__(self) -> None:
        if self.shape != "PolyBump":
            raise ParameterError(f"unknown data shape {self.shape!r}")
        if int(self.k) != self.k or self.k < 4:
            raise ParameterError("bump power k must be an integer >= 4")
        if min(self.cu0, self.cu1, self.cv0, self.cv1) < 0:
            raise ParameterError("data amplitudes must be nonnegative")
        if not (0 < self.r0 <= 1):
            raise ParameterError("r0 must lie in (0, 1]")

    def profile(self, r: np.ndarray) -> np.ndarray:
        x = np.clip(1.0 - (np.asarray(r) / self.r0) ** 2, 0.0, None)
        return x**self.k


@dataclass
class FieldState:
    t: float
    u: np.ndarray
    ut: np.ndarray
    v: np.ndarray
    vt: np.ndarray
    grid: GridSpec
    params: SystemParams
    u_prev: Optional[np.ndarray] = field(default=None, repr=False)
    v_prev: Optional[np.ndarray] = field(default=None, repr=False)
    n_steps: int = 0

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.u)), np.max(np.abs(self.v))))


def check_sign_conditions(data: InitialData, params: SystemParams, r: np.ndarray | None = None) -> None:
    """Pointwise ``u1 + r1 u0 >= 0`` and ``v1 + rho1 v0 >= 0`` (``r1, rho1`` the smaller roots)."""
    rp = roots(params)
    rr = np.linspace(0, data.r0, 257) if r is None else r
    prof = data.profile(rr)
    su = (data.cu1 + rp.r1 * data.cu0) * prof
    sv = (data.cv1 + rp.rho1 * data.cv0) * prof
    if np.any(su < 0) or np.any(sv < 0):
        raise SignConditionError(
            f"sign condition fails: u1 + r1 u0 ~ {data.cu1 + rp.r1 * data.cu0:.3g}, "
            f"v1 + rho1 v0 ~ {data.cv1 + rp.rho1 * data.cv0:.3g}"
        )


def init_from_arrays(
    grid: GridSpec, params: SystemParams, u0, u1, v0, v1, t0: float = 0.0
) -> FieldState:
    shape = (grid.nr + 1,)
    arrs = [np.array(np.broadcast_to(np.asarray(a, dtype=float), shape)) for a in (u0, u1, v0, v1)]
    for a in arrs:
        a[-1] = 0.0
    return FieldState(t0, arrs[0], arrs[1], arrs[2], arrs[3], grid, params)


def init(
    data: InitialData,
    grid: GridSpec,
    params: SystemParams,
    eps: float | None = None,
    check_signs: bool = True,
) -> FieldState:
    eps = params.eps if eps is None else eps
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    grid.check_light_cone(data.r0)
    r = grid.r
    if check_signs:
        check_sign_conditions(data, params, r)
    prof = data.profile(r)
    return init_from_arrays(
        grid,
        params,
        eps * data.cu0 * prof,
        eps * data.cu1 * prof,
        eps * data.cv0 * prof,
        eps * data.cv1 * prof,
    )


def radial_laplacian(w: np.ndarray, dr: float, n: int) -> np.ndarray:
    out = np.empty_like(w)
    out[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / dr**2
    if n > 1:
        ri = dr * np.arange(1, w.size - 1)
        out[1:-1] += (n - 1) * (w[2:] - w[:-2]) / (2.0 * dr * ri)
    # symmetric extension at the origin: Lap w(0) = n w''(0)
    out[0] = 2.0 * n * (w[1] - w[0]) / dr**2
    out[-1] = 0.0
    return out


def _accel(w, t, mu, nusq, src, dr, n):
    return radial_laplacian(w, dr, n) - nusq / (1.0 + t) ** 2 * w + src


def step(
    state: FieldState,
    nonlinear: bool = True,
    forcing_u: Forcing | None = None,
    forcing_v: Forcing | None = None,
) -> FieldState:
    """Advance one time step ``dt = cfl * dr``.

    The first step from a state without a previous level uses a second-order
    Taylor expansion with ``u_tt`` taken from the equation.
    """
    P, g = state.params, state.grid
    dt, dr, n, t = g.dt, g.dr, P.n, state.t
    r = g.r
    u, v = state.u, state.v
    s = 1.0 + t
    with np.errstate(over="ignore", invalid="ignore"):
        su = np.abs(v) ** P.p if nonlinear else np.zeros_like(u)
        sv = np.abs(u) ** P.q if nonlinear else np.zeros_like(v)
        if forcing_u is not None:
            su = su + forcing_u(t, r)
        if forcing_v is not None:
            sv = sv + forcing_v(t, r)
        Lu = _accel(u, t, P.mu1, P.nu1sq, su, dr, n)
        Lv = _accel(v, t, P.mu2, P.nu2sq, sv, dr, n)
        if state.u_prev is None:
            un = u + dt * state.ut + 0.5 * dt**2 * (Lu - P.mu1 / s * state.ut)
            vn = v + dt * state.vt + 0.5 * dt**2 * (Lv - P.mu2 / s * state.vt)
            ut_new = state.ut + dt * (Lu - P.mu1 / s * state.ut)
            vt_new = state.vt + dt * (Lv - P.mu2 / s * state.vt)
        else:
            gu = P.mu1 * dt / (2.0 * s)
            gv = P.mu2 * dt / (2.0 * s)
            un = (2.0 * u - (1.0 - gu) * state.u_prev + dt**2 * Lu) / (1.0 + gu)
            vn = (2.0 * v - (1.0 - gv) * state.v_prev + dt**2 * Lv) / (1.0 + gv)
            ut_new = (3.0 * un - 4.0 * u + state.u_prev) / (2.0 * dt)
            vt_new = (3.0 * vn - 4.0 * v + state.v_prev) / (2.0 * dt)
    # even extension closes the origin: the explicit n * u_rr(0) row would cap the
    # stable Courant number near 0.82 for n = 3
    for w in (un, vn):
        w[0] = (4.0 * w[1] - w[2]) / 3.0
        w[-1] = 0.0
    return FieldState(t + dt, un, ut_new, vn, vt_new, g, P, u_prev=u, v_prev=v, n_steps=state.n_steps + 1)


# --- diagnostics ----------------------------------------------------------------------


def radial_integral(f: np.ndarray, grid: GridSpec, n: int) -> float:
    """``int_{R^n} f dx`` for a radial profile, trapezoid rule in ``r``."""
    r = grid.r
    return float(sphere_area(n) * trapezoid(f * r ** (n - 1), r))


def bump_integral(n: int, r0: float, k: int) -> float:
    """Closed form of ``int (1 - |x|^2/r0^2)_+^k dx``."""
    return sphere_area(n) * r0**n / 2.0 * float(beta_fn(n / 2.0, k + 1.0))


def functionals(state: FieldState, tf1: TimeFactor | None = None, tf2: TimeFactor | None = None):
    """``(U, V, F, G)``: plain integrals and integrals against ``lambda_j(t) phi(x)``."""
    P, g = state.params, state.grid
    n = P.n
    tf1 = tf1 or TimeFactor(P.mu1, P.nu1sq)
    tf2 = tf2 or TimeFactor(P.mu2, P.nu2sq)
    U = radial_integral(state.u, g, n)
    V = radial_integral(state.v, g, n)
    phi = _phi_cache(n, g)
    lam1, _ = lambda_factor(tf1, state.t)
    lam2, _ = lambda_factor(tf2, state.t)
    Fv = lam1 * radial_integral(state.u * phi, g, n)
    Gv = lam2 * radial_integral(state.v * phi, g, n)
    return U, V, Fv, Gv


_PHI: dict = {}


def _phi_cache(n: int, g: GridSpec) -> np.ndarray:
    key = (n, g.r_max, g.nr)
    if key not in _PHI:
        if len(_PHI) > 16:
            _PHI.clear()
        _PHI[key] = phi_yz(n, g.r)
    return _PHI[key]


@dataclass
class History:
    """Snapshots of scalar diagnostics (and optionally the fields) along a run."""

    t: list = field(default_factory=list)
    U: list = field(default_factory=list)
    V: list = field(default_factory=list)
    F: list = field(default_factory=list)
    G: list = field(default_factory=list)
    max_u: list = field(default_factory=list)
    max_v: list = field(default_factory=list)
    src_u: list = field(default_factory=list)  # int |v|^p dx
    src_v: list = field(default_factory=list)  # int |u|^q dx
    fields: list = field(default_factory=list)
    grid: GridSpec | None = None
    params: SystemParams | None = None

    def record(self, state: FieldState, keep_fields: bool) -> None:
        U, V, Fv, Gv = functionals(state)
        P = state.params
        self.t.append(state.t)
        self.U.append(U)
        self.V.append(V)
        self.F.append(Fv)
        self.G.append(Gv)
        self.max_u.append(float(np.max(np.abs(state.u))))
        self.max_v.append(float(np.max(np.abs(state.v))))
        self.src_u.append(radial_integral(np.abs(state.v) ** P.p, state.grid, P.n))
        self.src_v.append(radial_integral(np.abs(state.u) ** P.q, state.grid, P.n))
        if keep_fields:
            self.fields.append((state.u.copy(), state.v.copy()))

    def arrays(self) -> dict:
        return {
            k: np.asarray(getattr(self, k))
            for k in ("t", "U", "V", "F", "G", "max_u", "max_v", "src_u", "src_v")
        }

    def to_rows(self) -> list[tuple]:
        return list(zip(self.t, self.U, self.V, self.F, self.G, self.max_u, self.max_v))


@dataclass
class RunResult:
    state: FieldState
    blow_up: bool
    T_cross: dict  # threshold -> crossing time (inf if never)
    detection: str  # "threshold", "nonfinite" or "none"
    history: History | None


def _crossing_time(t0: float, m0: float, t1: float, m1: float, thr: float) -> float:
    # log-linear interpolation of max|.| between two steps
    if not math.isfinite(m1) or m1 <= 0 or m0 <= 0:
        return t1
    if m1 <= m0:
        return t1
    frac = (math.log(thr) - math.log(m0)) / (math.log(m1) - math.log(m0))
    return t0 + min(max(frac, 0.0), 1.0) * (t1 - t0)


def simulate(
    state: FieldState,
    thresholds: tuple[float, ...] = (1e6, 1e8),
    nonlinear: bool = True,
    history: bool = False,
    keep_fields: bool = False,
    forcing_u: Forcing | None = None,
    forcing_v: Forcing | None = None,
    t_end: float | None = None,
) -> RunResult:
    """Integrate until the largest threshold is crossed, a non-finite value appears, or ``t_end``."""
    g = state.grid
    t_end = g.t_max if t_end is None else t_end
    n_steps = int(math.ceil((t_end - state.t) / g.dt - 1e-9))
    stride = max(1, n_steps // 2000)
    hist = History(grid=g, params=state.params) if history else None
    if hist is not None:
        hist.record(state, keep_fields)
    thr = sorted(thresholds)
    cross = {x: math.inf for x in thr}
    m_prev = state.max_abs()
    detection = "none"
    for k in range(n_steps):
        new = step(state, nonlinear, forcing_u, forcing_v)
        m = new.max_abs()
        finite = math.isfinite(m)
        for x in thr:
            if math.isinf(cross[x]) and (not finite or m >= x):
                cross[x] = _crossing_time(state.t, m_prev, new.t, m, x)
        if not finite:
            detection = "nonfinite"
            state = new
            break
        state, m_prev = new, m
        if hist is not None and ((k + 1) % stride == 0 or k == n_steps - 1):
            hist.record(state, keep_fields)
        if m >= thr[-1]:
            detection = "threshold"
            break
    blow = detection != "none"
    if blow and hist is not None and hist.t and hist.t[-1] != state.t and math.isfinite(state.max_abs()):
        hist.record(state, keep_fields)
    return RunResult(state, blow, cross, detection, hist)


@dataclass
class LifespanRecord:
    eps: float
    T_num: float  # math.inf when no blow-up before t_max
    blow_up: bool
    threshold_used: float
    converged: bool
    runtime_s: float = 0.0
    T_levels: list = field(default_factory=list)  # finest last
    T_cross_check: float = math.inf  # crossing time of the lower threshold on the finest grid
    cross_check_threshold: float = 1e6
    detection: str = "none"
    nr_levels: list = field(default_factory=list)

    def to_dict(self, include_runtime: bool = False) -> dict:
        def enc(x):
            return "Infinity" if isinstance(x, float) and math.isinf(x) else x

        d = {
            "eps": self.eps,
            "T_num": enc(self.T_num),
            "blow_up": self.blow_up,
            "threshold_used": self.threshold_used,
            "converged": self.converged,
            "T_levels": [enc(x) for x in self.T_levels],
            "nr_levels": list(self.nr_levels),
            "T_cross_check": enc(self.T_cross_check),
            "cross_check_threshold": self.cross_check_threshold,
            "detection": self.detection,
        }
        if include_runtime:
            d["runtime_s"] = self.runtime_s
        return d


def run_lifespan(
    data: InitialData,
    grid: GridSpec,
    params: SystemParams,
    eps: float | None = None,
    threshold: float = 1e8,
    cross_threshold: float = 1e6,
    check_signs: bool = True,
) -> LifespanRecord:
    """Measure the threshold lifespan on ``grid.refine_levels`` successively halved grids."""
    if threshold < 1e6:
        raise ParameterError("threshold must be >= 1e6")
    eps = params.eps if eps is None else eps
    t_start = time.perf_counter()
    Ts, nrs = [], []
    cross_check = math.inf
    detection = "none"
    for level in range(grid.refine_levels):
        g = grid.refined(level)
        state = init(data, g, params, eps, check_signs=check_signs)
        res = simulate(state, thresholds=(cross_threshold, threshold))
        Ts.append(res.T_cross[threshold])
        nrs.append(g.nr)
        cross_check = res.T_cross[cross_threshold]
        detection = res.detection
    T = Ts[-1]
    blow = math.isfinite(T)
    if len(Ts) == 1:
        converged = True
    elif all(math.isinf(x) for x in Ts[-2:]):
        converged = True
    elif math.isfinite(Ts[-1]) and math.isfinite(Ts[-2]):
        converged = abs(Ts[-1] - Ts[-2]) <= 0.05 * Ts[-1]
    else:
        converged = False
    runtime = time.perf_counter() - t_start
    log.info("eps=%g T_num=%s levels=%s runtime=%.2fs", eps, T, Ts, runtime)
    return LifespanRecord(
        eps=eps,
        T_num=T,
        blow_up=blow,
        threshold_used=threshold,
        converged=converged,
        runtime_s=runtime,
        T_levels=Ts,
        T_cross_check=cross_check,
        cross_check_threshold=cross_threshold,
        detection=detection,
        nr_levels=nrs,
    )


# --- the Y functional -------------------------------------------------------------------


def density_weight(density: Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]):
    """Turn a pointwise density ``w(t, r, u, v)`` into a snapshot weight ``W(t) = int w dx``."""

    def weight(t, grid: GridSpec, params: SystemParams, u, v) -> float:
        return radial_integral(density(t, grid.r, u, v), grid, params.n)

    return weight


@dataclass(frozen=True)
class YResult:
    R: np.ndarray
    Y: np.ndarray
    inner: np.ndarray  # int int w psi*_R
    full: np.ndarray  # int int w psi_R
    dY_numeric: np.ndarray
    derivative_rel_err: np.ndarray
    inequality_holds: np.ndarray


_GL8 = np.polynomial.legendre.leggauss(8)


def _gl_panels(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x, w = _GL8
    lo, hi = edges[:-1, None], edges[1:, None]
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def y_functional(
    history: History,
    weight: Callable,
    R_values,
    rel_step: float = 1e-3,
) -> YResult:
    """``Y[w](R) = int_0^R (int int w psi*_sigma) sigma^{-1} d sigma`` from stored snapshots.

    ``weight(t, grid, params, u, v)`` returns the spatial integral of ``w`` at one
    snapshot; ``W(t)`` is interpolated in time by a cubic spline. The outer
    integral is accumulated over one panel set whose breakpoints include every
    ``R`` and ``R (1 +- rel_step)``, so ``dY/dR`` is a central difference of
    values from the same quadrature.
    """
    if len(history.t) < 4:
        raise ValueError("need at least 4 snapshots")
    ts = np.asarray(history.t)
    T = ts[-1]
    if history.fields:
        W = np.array(
            [weight(t, history.grid, history.params, u, v) for t, (u, v) in zip(ts, history.fields)]
        )
    else:
        W = np.array([weight(t, history.grid, history.params, None, None) for t in ts])
    spacing = float(np.max(np.diff(ts)))
    Rs = np.atleast_1d(np.asarray(R_values, dtype=float))
    if np.any(Rs <= 0) or np.any(Rs * (1 + rel_step) > T):
        raise ValueError("R values must lie in (0, T)")
    if spacing > 0.05 * float(np.min(Rs)):
        warnings.warn(
            f"snapshot spacing {spacing:.3g} is coarse for R={np.min(Rs):.3g}; the inner integral may be inaccurate",
            RuntimeWarning,
        )
    spline = CubicSpline(ts, W)

    def inner(sigma: float, star: bool = True) -> float:
        # int W(t) psi(t/sigma) dt over [sigma/2, sigma] (or [0, sigma]) in s = t/sigma
        lo = 0.5 if star else 0.0
        panels = max(4, int(math.ceil((1.0 - lo) * sigma / (2.0 * spacing))))
        s, w = _gl_panels(np.linspace(lo, 1.0, panels + 1))
        psi = cutoff(CutoffSpec(1.0), s.ravel()).psi.reshape(s.shape)
        return float(sigma * np.sum(w * spline(sigma * s) * psi))

    h = rel_step * Rs
    marks = np.unique(np.concatenate([[0.0], Rs - h, Rs, Rs + h]))
    edges = [0.0]
    for a, b in zip(marks[:-1], marks[1:]):
        k = max(1, int(math.ceil((b - a) / max(4.0 * spacing, 1e-3 * marks[-1]))))
        edges.extend(np.linspace(a, b, k + 1)[1:])
    nodes, weights = _gl_panels(np.asarray(edges))
    g = np.array([inner(float(x)) / float(x) for x in nodes.ravel()]).reshape(nodes.shape)
    cum = np.concatenate([[0.0], np.cumsum(np.sum(weights * g, axis=1))])
    at = dict(zip(edges, cum))
    Yv = np.array([at[R] for R in Rs])
    dnum = np.array([(at[R + hh] - at[R - hh]) / (2 * hh) for R, hh in zip(Rs, h)])
    inn = np.array([inner(R) for R in Rs])
    full = np.array([inner(R, star=False) for R in Rs])
    target = inn / Rs
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.abs(dnum - target) / np.abs(target)
    return YResult(Rs, Yv, inn, full, dnum, err, Yv <= full * (1 + 1e-12))

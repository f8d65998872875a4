"""Empirical audits of two-sided kernel estimates and boundary profiles.

Comparability ``A ≍ B`` cannot be proven numerically.  Each audit samples the
ratio A/B on a grid that reaches a distance floor from the boundary and
reports its range; an estimate is accepted when the range is finite, not
wider than a sanity ceiling, and stable when the floor shrinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .ball_kernels import (
    check_model_ball,
    green,
    green_from_geometry,
    killing_radial,
    martin,
    poisson,
)
from .levy import StableModel
from .potentials import (
    BoundaryDensity,
    ExteriorDensity,
    ScalarField,
    green_potential_radial,
    martin_potential,
    poisson_potential,
)
from .quadrature import (
    Ball,
    DivergenceError,
    gk_panels,
    graded_breaks,
    integrate_from_zero,
    integrate_interval,
    pairwise_sum,
)

__all__ = [
    "ProfileSpec",
    "UFlags",
    "EstimateReport",
    "GridSpec",
    "PreconditionError",
    "check_U_conditions",
    "GreenProfile",
    "green_profile",
    "poisson_bound_ratio",
    "decade_exponent",
    "integral_finite_near_zero",
    "poisson_profile",
    "audit_kernel_estimate",
    "audit_stability",
    "region_decomposition",
    "loglog_slope",
    "RegimeFit",
    "poisson_regime",
    "poisson_regime_fit",
    "truncated_green_potential",
]

KINDS = ("green", "poisson", "martin", "killing", "mdsigma", "green_profile", "poisson_profile")


class PreconditionError(ValueError):
    """Profile does not satisfy the conditions an operation requires."""


@dataclass(frozen=True)
class ProfileSpec:
    """Boundary profile U(t) = t^(-beta) or an arbitrary positive rule."""

    beta: float | None = None
    rule: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if (self.beta is None) == (self.rule is None):
            raise ValueError("give exactly one of beta or rule")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.beta is not None:
            return t ** (-self.beta)
        return np.asarray(self.rule(t), dtype=float)

    @classmethod
    def power(cls, beta: float) -> "ProfileSpec":
        return cls(beta=float(beta))


@dataclass(frozen=True)
class UFlags:
    U1: bool
    U2: bool
    U3: bool
    U4: bool

    @property
    def all(self) -> bool:
        return self.U1 and self.U2 and self.U3 and self.U4


@dataclass(frozen=True)
class GridSpec:
    delta_floor: float = 1e-3
    samples: int = 1000
    beta: float | None = None

    def describe(self) -> str:
        return f"floor={self.delta_floor:g};samples={self.samples}" + (
            f";beta={self.beta:g}" if self.beta is not None else "")


@dataclass(frozen=True)
class EstimateReport:
    kind: str
    ratio_min: float
    ratio_max: float
    grid_spec: str
    samples: int
    passes: bool = True
    ratios: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def width(self) -> float:
        return self.ratio_max / self.ratio_min


# ---------------------------------------------------------------------------
# conditions (U)


def decade_exponent(fn, decades: int = 8, upper: float = 1.0) -> float:
    """Local growth exponent of an integrand near 0 from per-decade integrals.

    For an integrand ~ t^e the integral over [10^-(k+1), 10^-k] scales like
    10^(-k (e + 1)), so the ratio of the last two decade integrals recovers
    e + 1.  Positive values mean the integral converges at 0.
    """
    edges = upper * 10.0 ** -np.arange(decades - 1, decades + 2)
    parts = []
    for hi, lo in zip(edges[:-1], edges[1:]):
        try:
            parts.append(integrate_interval(fn, lo, hi, tol=1e-10, abs_floor=1e-300).value)
        except DivergenceError:
            return -math.inf
    p1, p2 = parts
    if p1 == 0.0 and p2 == 0.0:
        return math.inf
    if not (p1 > 0 and p2 > 0) or not (math.isfinite(p1) and math.isfinite(p2)):
        return -math.inf
    return float(-math.log10(p2 / p1))


def integral_finite_near_zero(fn, decades: int = 8, upper: float = 1.0, margin: float = 5e-3) -> bool:
    """Numerical decision for finiteness of int_0 fn, using ``decade_exponent``."""
    return decade_exponent(fn, decades, upper) > margin


def check_U_conditions(model: StableModel, profile: ProfileSpec, diam: float = 2.0) -> UFlags:
    """Decide (U1)-(U4) for a profile.

    Powers are decided by exponent arithmetic.  Increasing powers are neither
    almost nonincreasing nor bounded on half-lines, so (U2) and (U4) hold
    exactly when beta >= 0; on the bounded range (0, diam] only (U2) can fail.
    General rules use sampled sup/ratio tests on a log grid of 1000 points.
    """
    a2 = model.half
    if profile.beta is not None:
        b = profile.beta
        return UFlags(U1=b < 1 + a2, U2=b >= 0, U3=True, U4=True)
    u1 = integral_finite_near_zero(lambda t: profile(t) * t**a2)
    grid = np.geomspace(1e-8, 1.0, 1000)
    vals = profile(grid)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        return UFlags(u1, False, False, False)

    def almost_noninc(v):
        # max over s <= t of U(t) / U(s): running minimum from the left
        with np.errstate(divide="ignore"):
            return float(np.max(v / np.minimum.accumulate(v)))

    c_fine = almost_noninc(vals)
    c_coarse = almost_noninc(vals[grid >= 1e-4])
    u2 = math.isfinite(c_fine) and c_fine <= 2 * max(c_coarse, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rd = profile(grid[grid < 1.0]) / profile(2 * grid[grid < 1.0])
    u3 = bool(np.all(np.isfinite(rd))) and float(np.max(rd)) <= 2 * max(float(np.max(rd[grid[grid < 1] >= 1e-4])), 1.0)
    far = profile(np.geomspace(1e-3, diam, 200))
    u4 = bool(np.all(np.isfinite(far)))
    return UFlags(u1, u2, u3, u4)


# ---------------------------------------------------------------------------
# profile expressions


class GreenProfile(NamedTuple):
    near: float
    far: float

    @property
    def total(self) -> float:
        return self.near + self.far


def _int_0(fn, upper, tol=1e-9):
    return integrate_interval(fn, 0.0, upper, left=True, tol=tol, abs_floor=1e-300).value


def green_profile(model: StableModel, ball: Ball, profile: ProfileSpec, x) -> GreenProfile:
    """Both terms of the Green-potential profile at x.

    Returns ``(near, far)`` with near = V(d)/d * int_0^d U V and
    far = V(d) * int_d^diam U V / t, where d is the distance of x to the
    boundary.  Which term dominates is left to the caller.
    """
    flags = check_U_conditions(model, profile, ball.diam)
    if not flags.U1:
        raise DivergenceError("profile violates the integrability condition (U1)")
    d = float(ball.delta(np.asarray(x, dtype=float)))
    a2 = model.half
    vd = d**a2
    near = vd / d * _int_0(lambda t: profile(t) * t**a2, d)
    far = vd * integrate_interval(lambda t: profile(t) * t ** (a2 - 1), d, ball.diam, left=True, tol=1e-9).value
    return GreenProfile(near, far)


def _poisson_admissible(model: StableModel, profile: ProfileSpec) -> bool:
    a2 = model.half
    if profile.beta is not None:
        return -model.alpha < profile.beta < 1 - a2
    near = integral_finite_near_zero(lambda t: profile(t) * t ** (-a2))
    # tail over (1, inf) after t = 1 / s
    tail = integral_finite_near_zero(lambda s: profile(1 / s) * s ** (model.alpha - 1))
    return near and tail


def poisson_profile(model: StableModel, ball: Ball, profile: ProfileSpec, x) -> float:
    """Poisson-potential profile V(d) * int_0^diam U(t) / (V(t) (d + t)) dt."""
    if not _poisson_admissible(model, profile):
        raise DivergenceError("exterior profile violates the Poisson admissibility condition")
    d = float(ball.delta(np.asarray(x, dtype=float)))
    a2 = model.half
    fn = lambda t: profile(t) * np.asarray(t, dtype=float) ** (-a2) / (d + t)  # noqa: E731
    # near 0 the integrand is about U(t) t^(-alpha/2) / d; strong endpoint powers need the log variable
    if profile.beta is not None:
        e1 = 1.0 - profile.beta - a2
    else:
        e1 = decade_exponent(lambda t: profile(t) * np.asarray(t, dtype=float) ** (-a2), upper=min(d, 1.0))
    split = min(d, ball.diam)
    head = integrate_from_zero(fn, split, e1)
    tail = integrate_interval(fn, split, ball.diam, left=True, tol=1e-9).value if split < ball.diam else 0.0
    return d**a2 * (head + tail)


def poisson_bound_ratio(model: StableModel, ball: Ball, profile: ProfileSpec, x) -> float:
    """Ratio of the direct Poisson potential to V(d)/d; bounded above by the upper estimate."""
    d = float(ball.delta(np.asarray(x, dtype=float)))
    g = ExteriorDensity(profile=profile, beta=profile.beta)
    return poisson_potential(model, ball, g, x) * d / d**model.half


# ---------------------------------------------------------------------------
# audits


def _axis_point(ball: Ball, delta: float, angle: float = 0.0) -> np.ndarray:
    d = ball.dim
    p = np.zeros(d)
    p[0] = math.cos(angle)
    p[1] = math.sin(angle)
    return ball.center_array + (ball.radius - delta) * p


def _three_param_grid(floor: float, R: float, n: int):
    k = max(2, round(n ** (1 / 3)))
    s = np.geomspace(floor * R, 0.5 * R, k)
    q = np.geomspace(0.1, 10.0, k)
    tau = np.geomspace(0.1, 100.0, k)
    return s, q, tau


def _ratio_report(kind, ratios, grid: GridSpec) -> EstimateReport:
    r = np.asarray(ratios, dtype=float)
    ok = bool(np.all(np.isfinite(r)) and np.all(r > 0))
    rmin = float(np.min(r)) if ok else float("nan")
    rmax = float(np.max(r)) if ok else float("nan")
    passes = ok and rmax / rmin < 1e3
    return EstimateReport(kind, rmin, rmax, grid.describe(), int(r.size), passes, r)


def audit_kernel_estimate(model: StableModel, ball: Ball, kind: str, grid: GridSpec | None = None) -> EstimateReport:
    """Ratio of a computed quantity to its two-sided estimate over a sample grid."""
    check_model_ball(model, ball)
    grid = grid or GridSpec()
    if kind not in KINDS:
        raise ValueError(f"unknown audit kind {kind!r}")
    R = ball.radius
    d = model.dim
    a2 = model.half
    floor = grid.delta_floor
    n = grid.samples
    V = lambda t: np.asarray(t, dtype=float) ** a2  # noqa: E731

    if kind in ("green", "poisson"):
        s, q, tau = _three_param_grid(floor, R, n)
        S, Q, T = (a.ravel() for a in np.meshgrid(s, q, tau, indexing="ij"))
        dx = S
        if kind == "green":
            dy = np.minimum(S * Q, R * (1 - 1e-9))
            ang = np.minimum(T * S / R, math.pi)
            X = np.array([_axis_point(ball, a) for a in dx])
            Y = np.array([_axis_point(ball, b, c) for b, c in zip(dy, ang)])
            vals = green(model, ball, X, Y)
            r = np.linalg.norm(X - Y, axis=1)
            est = np.minimum(1, V(dx) / V(r)) * np.minimum(1, V(dy) / V(r)) * V(r) ** 2 / r**d
        else:
            dz = S * Q
            ang = np.minimum(T * S / R, math.pi)
            X = np.array([_axis_point(ball, a) for a in dx])
            Z = np.array([_axis_point(ball, -b, c) for b, c in zip(dz, ang)])
            vals = poisson(model, ball, X, Z)
            est = V(dx) / (V(dz) * (1 + V(dz))) * np.linalg.norm(X - Z, axis=1) ** (-d)
        return _ratio_report(kind, vals / est, grid)

    if kind == "martin":
        k = max(2, round(math.sqrt(n)))
        s = np.geomspace(floor * R, 0.5 * R, k)
        ang = np.geomspace(1e-3, math.pi, k)
        S, A = (a.ravel() for a in np.meshgrid(s, ang, indexing="ij"))
        X = np.array([_axis_point(ball, a) for a in S])
        Z = np.array([_axis_point(ball, 0.0, b) for b in A])
        vals = martin(model, ball, X, Z)
        est = V(S) * np.linalg.norm(X - Z, axis=1) ** (-d)
        return _ratio_report(kind, vals / est, grid)

    deltas = np.geomspace(floor * R, R, n)
    if kind == "killing":
        vals = killing_radial(model, R, deltas)
        return _ratio_report(kind, vals * V(deltas) ** 2, grid)
    if kind == "mdsigma":
        one = BoundaryDensity.const(1.0)
        vals = np.array([martin_potential(model, ball, one, _axis_point(ball, t), tol=1e-7) for t in deltas])
        return _ratio_report(kind, vals * deltas / V(deltas), grid)

    beta = 0.0 if grid.beta is None else grid.beta
    prof = ProfileSpec.power(beta)
    deltas = np.geomspace(floor * R, R, n)
    ratios = []
    if kind == "green_profile":
        f = ScalarField.delta_power_field(beta)
        for t in deltas:
            direct = green_potential_radial(model, ball, f, float(t), tol=1e-6)
            ratios.append(direct / sum(green_profile(model, ball, prof, _axis_point(ball, t))))
    else:
        g = ExteriorDensity.power(beta)
        for t in deltas:
            x = _axis_point(ball, t)
            ratios.append(poisson_potential(model, ball, g, x) / poisson_profile(model, ball, prof, x))
    return _ratio_report(kind, ratios, grid)


def audit_stability(model: StableModel, ball: Ball, kind: str, floors=(1e-2, 1e-3), samples: int = 1000,
                    beta: float | None = None) -> tuple[EstimateReport, EstimateReport, float]:
    """Audit at two distance floors and the relative change of the ratio interval."""
    r1 = audit_kernel_estimate(model, ball, kind, GridSpec(floors[0], samples, beta))
    r2 = audit_kernel_estimate(model, ball, kind, GridSpec(floors[1], samples, beta))
    change = max(abs(r2.ratio_min - r1.ratio_min) / r2.ratio_min, abs(r2.ratio_max - r1.ratio_max) / r2.ratio_max)
    return r1, r2, float(change)


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass(frozen=True)
class RegimeFit:
    """Boundary behavior of P_D g for g = t^-beta near the sphere."""

    beta: float
    regime: str
    predicted_slope: float
    slope: float
    resid_power: float
    resid_log: float


def poisson_regime(model: StableModel, beta: float) -> tuple[str, float]:
    """Regime of P_D(t^-beta) as delta -> 0 and its predicted log-log slope.

    delta^-beta when beta > -alpha/2, delta^(alpha/2) when beta < -alpha/2,
    and delta^(alpha/2) log(1/delta) at the crossover (slope alpha/2 up to the log).
    """
    a2 = model.half
    if beta > -a2:
        return "power-beta", -beta
    if beta < -a2:
        return "power-alpha", a2
    return "log", a2


def _power_residual(logd, logv) -> float:
    """RMS residual of a free power fit c delta^s (two parameters)."""
    coef = np.polyfit(logd, logv, 1)
    r = logv - np.polyval(coef, logd)
    return float(np.sqrt(np.mean(r**2)))


def _log_residual(logd, logv, a2: float) -> float:
    """RMS residual of c delta^(alpha/2) (log(1/delta) + b) over c and b (two parameters)."""
    ell = -logd

    def rms(b):
        r = logv - a2 * logd - np.log(ell + b)
        return float(np.sqrt(np.mean((r - r.mean()) ** 2)))

    lo = -float(ell.min()) + 1e-9
    res = minimize_scalar(rms, bounds=(lo, 1e6), method="bounded", options={"xatol": 1e-10})
    return min(float(res.fun), rms(0.0))


def poisson_regime_fit(model: StableModel, ball: Ball, beta: float, deltas=None) -> RegimeFit:
    """Measured slope of P_D(t^-beta) against delta and residuals of two model profiles.

    Both models have two parameters: ``resid_power`` is for a free power
    c delta^s and ``resid_log`` for c delta^(alpha/2) (log(1/delta) + b).
    """
    check_model_ball(model, ball)
    d = np.geomspace(1e-4, 1e-2, 9) * ball.radius if deltas is None else np.asarray(deltas, dtype=float)
    g = ExteriorDensity.power(beta)
    vals = np.array([poisson_potential(model, ball, g, _axis_point(ball, t)) for t in d])
    logd, logv = np.log(d), np.log(vals)
    regime, pred = poisson_regime(model, beta)
    return RegimeFit(float(beta), regime, pred, loglog_slope(d, vals),
                     _power_residual(logd, logv), _log_residual(logd, logv, model.half))


# ---------------------------------------------------------------------------
# appendix region decomposition


def _sphere_green_band(model: StableModel, R: float, dx: float, dy: np.ndarray, w_lo: float, w_hi: float):
    """Integral of G(x, y) over the part of the sphere |y| = R - dy with w_lo <= |x - y| < w_hi."""
    dy = np.asarray(dy, dtype=float)
    r = R - dx
    rho = R - dy
    ax = dx * (2 * R - dx)
    ay = dy * (2 * R - dy)
    gap = np.abs(dy - dx)
    rr = np.maximum(r * rho, 1e-300)

    def theta_of(w):
        arg = (w * w - gap * gap) / (4 * rr)
        return 2 * np.arcsin(np.sqrt(np.clip(arg, 0.0, 1.0)))

    th_lo = theta_of(w_lo) if w_lo > 0 else np.zeros_like(dy)
    th_hi = theta_of(w_hi) if math.isfinite(w_hi) else np.full_like(dy, math.pi)
    theta_c = np.maximum(gap / np.sqrt(rr), 1e-300)
    v_lo = np.arcsinh(th_lo / theta_c)
    v_hi = np.arcsinh(th_hi / theta_c)
    xg, wg = np.polynomial.legendre.leggauss(8)
    npan = 16
    edges = np.linspace(0.0, 1.0, npan + 1)
    u = (0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 / npan * xg[None, :]).ravel()
    wu = np.tile(0.5 / npan * wg, npan)
    span = (v_hi - v_lo)[:, None]
    v = v_lo[:, None] + u[None, :] * span
    th = np.minimum(theta_c[:, None] * np.sinh(v), math.pi)
    jac = theta_c[:, None] * np.cosh(v) * span
    s2 = np.sin(0.5 * th)
    dist = np.sqrt(gap[:, None] ** 2 + 4 * r * rho[:, None] * s2 * s2)
    g = green_from_geometry(model, R, ax, ay[:, None], dist)
    ang = 2 * math.pi * np.sin(th) if model.dim == 3 else 2.0
    out = np.sum(g * ang * jac * wu[None, :], axis=1)
    return np.where(span[:, 0] > 0, out, 0.0)


def _band_integral(model, ball, profile, dx, t_lo, t_hi, w_lo, w_hi):
    """Integral of G(x, y) U(delta(y)) over t_lo < delta(y) < t_hi, w_lo <= |x-y| < w_hi."""
    if t_hi <= t_lo:
        return 0.0
    R = ball.radius
    cuts = [c for c in (dx,) if t_lo < c < t_hi]
    br = graded_breaks(t_lo, t_hi, left=True, right=True, interior=cuts, bulk=8, depth=30, ratio=0.2)
    t, wk, _ = gk_panels(br)
    rho = R - t
    vals = rho ** (model.dim - 1) * profile(t) * _sphere_green_band(model, R, dx, t, w_lo, w_hi)
    return pairwise_sum(wk * vals)


def region_decomposition(model: StableModel, ball: Ball, profile: ProfileSpec, x, eta: float | None = None) -> dict:
    """Split the Green potential of U(delta) 1(delta < eta) into the appendix regions.

    Returns a dict with the region integrals (keys I1..I5 when the point is
    within eta/2 of the boundary, J1 and J2 otherwise), their sum under
    ``total`` and the branch name.
    """
    check_model_ball(model, ball)
    flags = check_U_conditions(model, profile, ball.diam)
    if not flags.all:
        raise PreconditionError(f"profile fails conditions (U): {flags}")
    eta = ball.diam / 40 if eta is None else float(eta)
    dx = float(ball.delta(np.asarray(x, dtype=float)))
    r0 = ball.diam / 10
    inf = math.inf
    band = lambda tl, th, wl, wh: _band_integral(model, ball, profile, dx, tl, th, wl, wh)  # noqa: E731
    if dx < eta / 2:
        parts = {
            "I1": band(dx / 2, 3 * dx / 2, 0.0, dx / 2),
            "I2": band(0.0, eta, r0, inf),
            "I3": band(0.0, dx / 2, 0.0, r0),
            "I4": band(3 * dx / 2, eta, 0.0, r0),
            "I5": band(dx / 2, 3 * dx / 2, dx / 2, r0),
        }
        branch = "near"
    else:
        parts = {
            "J1": band(0.0, eta / 4, 0.0, inf),
            "J2": band(eta / 4, eta, 0.0, inf),
        }
        branch = "away"
    parts["total"] = float(sum(parts.values()))
    parts["branch"] = branch
    parts["eta"] = eta
    return parts


def truncated_green_potential(model: StableModel, ball: Ball, profile: ProfileSpec, x, eta: float) -> float:
    """Direct Green potential of U(delta) 1(delta < eta), for comparison with the regions."""
    f = ScalarField.from_delta_profile(lambda t: np.where(np.asarray(t) < eta, profile(t), 0.0), breaks=(eta,))
    return green_potential_radial(model, ball, f, float(ball.delta(np.asarray(x, dtype=float))), tol=1e-7)

"""Green, Poisson and Martin potentials on a ball, and a Kato-class checker.

Radial densities are handled by exact angular reductions so that every
potential of a radial density is a one-dimensional integral in the distance
to the boundary; general densities go through the polar tensor rules of the
quadrature module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

from .ball_kernels import check_model_ball, green, green_from_geometry, martin
from .levy import DomainError, StableModel, sphere_area
from .quadrature import (
    Ball,
    DivergenceError,
    QuadratureBudgetError,
    SingularitySpec,
    gk_panels,
    graded_breaks,
    integrate_ball,
    integrate_interval,
    integrate_sphere,
    pairwise_sum,
)

__all__ = [
    "ScalarField",
    "ExteriorDensity",
    "BoundaryDensity",
    "KatoReport",
    "radial_grid",
    "sphere_green",
    "green_potential",
    "green_potential_radial",
    "RadialGreenOperator",
    "poisson_potential",
    "martin_potential",
    "martin_sigma_exact",
    "exit_time_exact",
    "kato_check",
]

_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class ScalarField:
    """A real function on the ball.

    ``radial`` maps the distance to the boundary to a value and is set for
    rotationally symmetric fields; ``point`` maps an (n, d) array of points to
    values.  ``support`` is an optional ball containing the support and
    ``breaks`` lists boundary distances where the radial rule has kinks.
    ``delta_power`` records beta when the field is a multiple of
    ``delta^(-beta)``.
    """

    radial: Callable[[np.ndarray], np.ndarray] | None = None
    point: Callable[[np.ndarray], np.ndarray] | None = None
    support: Ball | None = None
    breaks: tuple = ()
    delta_power: float | None = None
    meta: str = ""
    center: tuple | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def constant(cls, c: float, meta: str = "") -> "ScalarField":
        return cls(radial=lambda t: np.full(np.shape(t), float(c)),
                   delta_power=0.0 if c != 0 else None, meta=meta or f"const {c}")

    @classmethod
    def zero(cls) -> "ScalarField":
        return cls.constant(0.0, "zero")

    @classmethod
    def from_delta_profile(cls, profile: Callable[[np.ndarray], np.ndarray], *,
                           beta: float | None = None, breaks: Sequence[float] = (),
                           meta: str = "") -> "ScalarField":
        return cls(radial=profile, delta_power=beta, breaks=tuple(breaks), meta=meta or "delta profile")

    @classmethod
    def delta_power_field(cls, beta: float, scale: float = 1.0) -> "ScalarField":
        return cls(radial=lambda t: scale * np.asarray(t, dtype=float) ** (-beta),
                   delta_power=float(beta), meta=f"delta^-{beta}")

    @classmethod
    def from_points(cls, fn: Callable[[np.ndarray], np.ndarray], *, support: Ball | None = None,
                    meta: str = "") -> "ScalarField":
        return cls(point=fn, support=support, meta=meta or "pointwise")

    @classmethod
    def from_nodes(cls, deltas: np.ndarray, values: np.ndarray,
                   shape: Callable[[np.ndarray], np.ndarray] | None = None, meta: str = "") -> "ScalarField":
        """Monotone cubic interpolant in the boundary distance of ``values / shape``.

        Outside the node range the normalized values are held constant.
        """
        dl = np.asarray(deltas, dtype=float)
        order = np.argsort(dl)
        dl = dl[order]
        vals = np.asarray(values, dtype=float)[order]
        norm = vals.copy() if shape is None else vals / shape(dl)
        cubic = PchipInterpolator(dl, norm, extrapolate=False)

        def interp(t):
            t = np.clip(np.asarray(t, dtype=float), dl[0], dl[-1])
            return cubic(t)

        if shape is None:
            rad = interp
        else:
            def rad(t):
                t = np.asarray(t, dtype=float)
                return shape(t) * interp(t)
        f = cls(radial=rad, meta=meta or "nodal interpolant")
        f._cache["nodes"] = (dl, vals)
        return f

    @property
    def is_radial(self) -> bool:
        return self.radial is not None

    def __call__(self, points, ball: Ball | None = None):
        p = np.asarray(points, dtype=float)
        if self.point is not None:
            return self.point(p)
        if ball is None:
            raise ValueError("radial fields need the ball to be evaluated at points")
        return self.radial(ball.delta(p))

    def on_grid(self, deltas: np.ndarray) -> np.ndarray:
        """Values at radial grid nodes, computed once and cached."""
        key = ("grid", np.asarray(deltas, dtype=float).tobytes())
        if key not in self._cache:
            if self.radial is None:
                raise ValueError("grid caching is only available for radial fields")
            vals = np.asarray(self.radial(np.asarray(deltas, dtype=float)), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise DivergenceError("field is not finite on the grid")
            vals.setflags(write=False)
            self._cache[key] = vals
        return self._cache[key]


@dataclass(frozen=True)
class ExteriorDensity:
    """Exterior data as a function of the distance to the ball."""

    profile: Callable[[np.ndarray], np.ndarray]
    decay_exponent: float = math.inf
    beta: float | None = None
    breaks: tuple = ()
    support_end: float | None = None
    meta: str = ""

    @classmethod
    def power(cls, beta: float, scale: float = 1.0) -> "ExteriorDensity":
        return cls(profile=lambda t: scale * np.asarray(t, dtype=float) ** (-beta),
                   decay_exponent=beta, beta=float(beta), meta=f"t^-{beta}")

    @classmethod
    def indicator(cls, lo: float, hi: float, value: float = 1.0) -> "ExteriorDensity":
        return cls(profile=lambda t: np.where((np.asarray(t) > lo) & (np.asarray(t) < hi), value, 0.0),
                   breaks=(lo, hi), support_end=hi, meta=f"1({lo},{hi})")

    @classmethod
    def zero(cls) -> "ExteriorDensity":
        return cls(profile=lambda t: np.zeros(np.shape(t)), support_end=0.0, meta="zero")

    def admissible(self, model: StableModel) -> bool:
        """Finiteness of the Poisson admissibility integral, decided by exponents for powers."""
        if self.support_end == 0.0:
            return True
        if self.beta is not None:
            return -model.alpha < self.beta < 1 - model.half
        return True


@dataclass(frozen=True)
class BoundaryDensity:
    """Nonnegative continuous density h on the sphere."""

    h: Callable[[np.ndarray], np.ndarray]
    constant: float | None = None
    meta: str = ""

    @classmethod
    def const(cls, value: float) -> "BoundaryDensity":
        return cls(h=lambda z: np.full(np.asarray(z).shape[:-1], float(value)), constant=float(value),
                   meta=f"const {value}")


@dataclass(frozen=True)
class KatoReport:
    passes: bool
    epsilon_profile: list
    limit_estimate: float
    divergent: bool = False
    slope: float = float("nan")


# ---------------------------------------------------------------------------
# grids and radial kernels


def radial_grid(ball: Ball, n: int = 64, floor: float = 1e-6) -> np.ndarray:
    """Boundary distances of grid nodes, ascending, graded toward the sphere.

    Half of the nodes are geometric in the distance from ``floor * R`` to
    ``R / 2``; the rest are uniform in the radius out to the center.
    """
    R = ball.radius
    n_geo = n // 2
    geo = np.geomspace(floor * R, 0.5 * R, n_geo)
    uni = np.linspace(0.5 * R, R, n - n_geo + 1)[1:]
    return np.concatenate([geo, uni])


def sphere_green(model: StableModel, radius: float, dx: float, dy: np.ndarray) -> np.ndarray:
    """Integral of G(x, y) over the sphere |y| = R - dy, with |x| = R - dx.

    Uses the full surface measure of the unit sphere (not the average).  The
    polar angle is mapped by theta = theta_c sinh(v), where theta_c is the
    angular width of the diagonal singularity, so the integrand is smooth in
    v at every scale.
    """
    d = model.dim
    R = radius
    dy = np.asarray(dy, dtype=float)
    r = R - dx
    rho = R - dy
    ax = dx * (2 * R - dx)
    ay = dy * (2 * R - dy)
    if r <= 1e-9 * R:
        # x at the center up to a relative O(1e-9) perturbation
        return sphere_area(d) * green_from_geometry(model, R, ax, ay, np.maximum(rho, r))
    out = np.empty_like(dy)
    small = rho <= 0
    if np.any(small):
        out[small] = sphere_area(d) * green_from_geometry(model, R, ax, ay[small], r)
    idx = ~small
    if not np.any(idx):
        return out
    rho_i, ay_i = rho[idx], ay[idx]
    gap = np.abs(dy[idx] - dx)
    theta_c = np.maximum(gap / np.sqrt(r * rho_i), 1e-300)
    vmax = np.arcsinh(math.pi / theta_c)
    npan = 16
    edges = np.linspace(0.0, 1.0, npan + 1)
    u = (0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 / npan * _GL8_X[None, :]).ravel()
    wu = np.tile(0.5 / npan * _GL8_W, npan)
    v = u[None, :] * vmax[:, None]
    th = np.minimum(theta_c[:, None] * np.sinh(v), math.pi)
    jac = theta_c[:, None] * np.cosh(v) * vmax[:, None]
    s2 = np.sin(0.5 * th)
    dist = np.sqrt(gap[:, None] ** 2 + 4 * r * rho_i[:, None] * s2 * s2)
    g = green_from_geometry(model, R, ax, ay_i[:, None], dist)
    ang = 2 * math.pi * np.sin(th) if d == 3 else 2.0
    out[idx] = np.sum(g * ang * jac * wu[None, :], axis=1)
    return out


def _radial_kernel(model: StableModel, radius: float, dx: float, dy: np.ndarray) -> np.ndarray:
    rho = radius - np.asarray(dy)
    return rho ** (model.dim - 1) * sphere_green(model, radius, dx, dy)


def _radial_breaks(radius: float, dx: float, kinks: Sequence[float], level: int) -> np.ndarray:
    """Breaks in the boundary distance, graded toward the sphere, the center and dx."""
    cuts = [dx] if 0 < dx < radius else []
    return graded_breaks(0.0, radius, left=True, right=True, interior=cuts, plain=kinks,
                         bulk=4 * 2**level, depth=30 + 6 * level, ratio=0.2)


def _check_profile_integrable(model: StableModel, f: ScalarField) -> None:
    if f.delta_power is not None and not f.delta_power < 1 + model.half:
        raise DivergenceError(
            f"Green potential of delta^-{f.delta_power} is infinite (needs beta < 1 + alpha/2)")


def green_potential_radial(model: StableModel, ball: Ball, f: ScalarField, delta_x: float,
                           tol: float = 1e-6, breaks: Sequence[float] = ()) -> float:
    """Green potential of a radial field at a point at boundary distance ``delta_x``."""
    _check_profile_integrable(model, f)
    R = ball.radius
    extra = tuple(f.breaks) + tuple(breaks)

    def integrand(dy):
        return _radial_kernel(model, R, delta_x, dy) * f.radial(dy)

    prev = None
    for level in range(4):
        br = _radial_breaks(R, delta_x, extra, level)
        x, wk, wg = gk_panels(br)
        vals = integrand(x)
        if not np.all(np.isfinite(vals)):
            raise DivergenceError("Green potential integrand is not finite")
        q = pairwise_sum(wk * vals)
        err = abs(q - pairwise_sum(wg * vals))
        if prev is not None:
            err = min(err, abs(q - prev))
            if err <= tol * abs(q) or q == 0.0:
                return q
        prev = q
    raise QuadratureBudgetError("radial Green potential did not converge",
                                best=_qr(q, err))


def _qr(q, err):
    from .quadrature import QuadratureResult
    return QuadratureResult(q, err, 0)


def green_potential(model: StableModel, ball: Ball, f: ScalarField, x, tol: float = 1e-6,
                    budget: int = 5 * 10**6) -> float:
    """G_D f(x) for a radial or pointwise field ``f``."""
    check_model_ball(model, ball)
    x = np.asarray(x, dtype=float)
    dx = float(ball.delta(x))
    if dx <= 0:
        return 0.0
    if f.is_radial:
        edge = ()
        if f.support is not None and np.allclose(f.support.center_array, ball.center_array):
            edge = (ball.radius - f.support.radius,)
        return green_potential_radial(model, ball, f, dx, tol, breaks=edge)

    def integrand(pts):
        return green(model, ball, x, pts) * f.point(pts)

    region = f.support
    sing = SingularitySpec(location=x, exponent=model.dim - model.alpha)
    res = integrate_ball(integrand, ball, sing, tol, budget=budget, region=region)
    return res.value


class RadialGreenOperator:
    """Matrix of the Green operator on piecewise-linear radial fields.

    For nodes ``delta_j`` and a weight ``w(delta)`` the entry ``A[i, j]`` is
    the Green potential at node i of ``w * phi_j``, with ``phi_j`` the hat
    function of node j (held constant beyond the outermost nodes).  Applying
    ``A`` to nodal values ``g_j`` gives the Green potential of ``w`` times the
    interpolant of ``g``.
    """

    def __init__(self, model: StableModel, ball: Ball, deltas: np.ndarray,
                 weight: Callable[[np.ndarray], np.ndarray], level: int = 1):
        self.model, self.ball = model, ball
        self.deltas = np.asarray(deltas, dtype=float)
        if np.any(np.diff(self.deltas) <= 0):
            raise ValueError("grid distances must be strictly increasing")
        n = self.deltas.size
        R = ball.radius
        A = np.zeros((n, n))
        for i, dxi in enumerate(self.deltas):
            br = _radial_breaks(R, dxi, self.deltas, level)
            t, wk, _ = gk_panels(br)
            vals = _radial_kernel(model, R, dxi, t) * weight(t) * wk
            if not np.all(np.isfinite(vals)):
                raise DivergenceError("Green operator weight is not integrable")
            j = np.clip(np.searchsorted(self.deltas, t) - 1, 0, n - 2)
            lo, hi = self.deltas[j], self.deltas[j + 1]
            lam = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
            np.add.at(A[i], j, vals * (1 - lam))
            np.add.at(A[i], j + 1, vals * lam)
        self.matrix = A
        self.matrix.setflags(write=False)

    def apply(self, nodal: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(nodal, dtype=float)


# ---------------------------------------------------------------------------
# Poisson and Martin potentials


def poisson_potential(model: StableModel, ball: Ball, g: ExteriorDensity, x, tol: float = 1e-8) -> float:
    """P_D g(x) for exterior data depending on the distance to the ball.

    The angular integral of |x - z|^(-d) over a sphere of radius rho > |x| is
    |S| rho^(2-d) / (rho^2 - |x|^2), which leaves one radial integral.
    """
    check_model_ball(model, ball)
    if not g.admissible(model):
        raise DivergenceError("exterior density violates the Poisson admissibility condition")
    if g.support_end == 0.0:
        return 0.0
    R = ball.radius
    x = np.asarray(x, dtype=float)
    dx = float(ball.delta(x))
    if dx <= 0:
        raise DomainError("x must lie strictly inside the ball")
    r = R - dx
    a = model.half
    pref = model.poisson_const * sphere_area(model.dim) * (dx * (2 * R - dx)) ** a

    # power substitutions at both ends: near t = 0 the integrand behaves like
    # t^(kap-1), at infinity like t^(-1-gam); with t = T s^(1/kap) and
    # t = T s^(-1/gam) both pieces become smooth in s, and the powers are
    # cancelled analytically so only bounded factors are evaluated
    beta = g.beta if g.beta is not None else 0.0
    kap = 1 - a - beta
    gam = model.alpha + beta

    def flat(t):
        # g(t) t^beta, bounded for power profiles
        return g.profile(t) * t**beta

    end = g.support_end
    T = 10.0 * R if end is None else end
    cuts = [c for c in g.breaks if 0 < c < T]
    if dx < T:
        cuts.append(dx)
    interior = [(c / T) ** kap for c in cuts]

    def near(s):
        t = np.maximum(T * s ** (1 / kap), 1e-300)
        rho = R + t
        return T ** kap / kap * flat(t) * (2 * R + t) ** (-a) * rho / ((t + dx) * (rho + r))

    res1 = integrate_interval(near, 0.0, 1.0, left=True, interior=interior, tol=tol)
    total = res1.value
    if end is None:
        def tail(s):
            with np.errstate(over="ignore"):
                t = np.minimum(T * s ** (-1 / gam), 1e100)
            rho = R + t
            return (T ** (-gam) / gam * flat(t) * (t / (2 * R + t)) ** a * (t / (t + dx))
                    * rho / (rho + r))

        res2 = integrate_interval(tail, 0.0, 1.0, tol=tol)
        total += res2.value
    return pref * total


def martin_sigma_exact(model: StableModel, ball: Ball, x) -> float:
    """Closed form of the Martin potential of surface measure.

    Follows from the classical Poisson-kernel identity for the sphere; used as
    an oracle.
    """
    R = ball.radius
    dx = float(ball.delta(np.asarray(x, dtype=float)))
    d, a = model.dim, model.alpha
    return sphere_area(d) * R ** (d - a + 1) * (dx * (2 * R - dx)) ** (a / 2 - 1)


def exit_time_exact(model: StableModel, ball: Ball, delta):
    """G_D 1 (the expected exit time) at boundary distance ``delta``, in closed form."""
    R = ball.radius
    d, a = model.dim, model.alpha
    delta = np.asarray(delta, dtype=float)
    kappa = gamma_fn(d / 2) / (2.0**a * gamma_fn(1 + a / 2) * gamma_fn((d + a) / 2))
    out = kappa * (delta * (2 * R - delta)) ** (a / 2)
    return float(out) if out.ndim == 0 else out


def martin_potential(model: StableModel, ball: Ball, h: BoundaryDensity, x, tol: float = 1e-8) -> float:
    """M_D mu(x) for mu = h sigma, by quadrature on the sphere."""
    check_model_ball(model, ball)
    x = np.asarray(x, dtype=float)
    if float(ball.delta(x)) <= 0:
        raise DomainError("x must lie strictly inside the ball")
    if h.constant == 0.0:
        return 0.0
    rel = x - ball.center_array
    focus = rel if np.linalg.norm(rel) > 0 else None

    def integrand(z):
        return martin(model, ball, x, z) * h.h(z)

    res = integrate_sphere(integrand, ball, tol, focus=focus, axisymmetric=h.constant is not None,
                           budget=10**7)
    return res.value


# ---------------------------------------------------------------------------
# Kato class


def _local_mass(model: StableModel, ball: Ball, q: ScalarField, dx: float, eps: float) -> float:
    """Integral over B(x, eps) in D of |q(y)| |x-y|^(alpha-d)."""
    R = ball.radius
    r = R - dx
    d, a = model.dim, model.alpha
    from .ball_kernels import chord_length

    br_th = graded_breaks(0.0, math.pi, left=True, bulk=8, depth=14)
    th, wth, _ = gk_panels(br_th)
    c = np.cos(th)
    ch = chord_length(r, dx, R, c) if r > 0 else np.full_like(th, R)
    send = np.minimum(eps, ch)
    hits = ch <= eps
    br_s = graded_breaks(0.0, 1.0, left=True, right=True, bulk=4, depth=16)
    t, wt, _ = gk_panels(br_s)
    s = t[:, None] * send[None, :]
    # distance to the sphere: (chord - s)(s + chord + 2 r cos) / (R + |y|)
    y2 = r * r + s * s + 2 * r * s * c[None, :]
    ny = np.sqrt(np.maximum(y2, 0.0))
    rem = np.where(hits[None, :], (1 - t)[:, None] * ch[None, :], ch[None, :] - s)
    dy = rem * (s + ch[None, :] + 2 * r * c[None, :]) / (R + ny)
    dy = np.maximum(dy, 1e-300)
    vals = np.abs(q.radial(dy)) * s ** (a - 1)
    if not np.all(np.isfinite(vals)):
        raise DivergenceError("local Kato mass is infinite")
    ang = 2 * math.pi * np.sin(th) if d == 3 else 2.0 * np.ones_like(th)
    return float(np.sum(vals * (wt[:, None] * send[None, :]) * (ang * wth)[None, :]))


def kato_check(model: StableModel, ball: Ball, q: ScalarField, eps_list: Sequence[float] | None = None,
               n_points: int = 200) -> KatoReport:
    """Sufficient Kato-class certificate via the local mass function m(eps).

    For the stable process phi(r^-2)^-1 = r^alpha, so m(eps) is the supremum
    over grid points x of the integral of |q(y)| |x - y|^(alpha - d) over
    B(x, eps).  The field passes when log m(eps) increases with log eps.
    """
    check_model_ball(model, ball)
    if not q.is_radial:
        raise ValueError("kato_check needs a radial field")
    R = ball.radius
    eps = np.sort(np.asarray(eps_list if eps_list is not None else np.geomspace(2e-2, 0.5, 6) * R, dtype=float))
    deltas = np.concatenate([np.geomspace(1e-3 * R, 0.5 * R, n_points - n_points // 4),
                             np.linspace(0.5 * R, R, n_points // 4 + 1)[1:]])
    if q.delta_power is not None and q.delta_power >= 1:
        return KatoReport(False, [(float(e), math.inf) for e in eps], math.inf, divergent=True)
    prof = []
    try:
        for e in eps:
            m = max(_local_mass(model, ball, q, float(dx), float(e)) for dx in deltas)
            prof.append((float(e), float(m)))
    except DivergenceError:
        return KatoReport(False, prof + [(float(e), math.inf) for e in eps[len(prof):]], math.inf,
                          divergent=True)
    le = np.log([p[0] for p in prof])
    lm = np.log(np.maximum([p[1] for p in prof], 1e-300))
    if all(p[1] == 0 for p in prof):
        return KatoReport(True, prof, 0.0, slope=math.inf)
    slope = float(np.polyfit(le, lm, 1)[0])
    # extrapolate the fitted power law to eps -> 0
    limit = 0.0 if slope > 0 else math.inf
    return KatoReport(slope > 0, prof, limit, slope=slope)

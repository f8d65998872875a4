"""Boundary trace of functions on the ball, V-normal derivatives and the E_D operator.

The trace is approximated along concentric balls U_k of radius R(1 - 2^-k)
centered at x0 = the ball center.  For radial fields the measure
eta_k(dz) = G_{U_k}(x0, z) (int_{D \\ U_k} j(|z - y|) u(y) dy) dz is rotation
invariant, so its angular density is constant and only the total mass has
to be computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import hyp2f1

from .ball_kernels import check_model_ball, green_from_geometry, modified_martin, modified_martin_const
from .levy import DomainError, StableModel, renewal_eval, sphere_area
from .potentials import ScalarField, green_potential
from .quadrature import (
    Ball,
    DivergenceError,
    gk_panels,
    graded_breaks,
    integrate_ball,
    integrate_interval,
    integrate_sphere,
)

__all__ = [
    "LimitError",
    "TraceEstimate",
    "EDReport",
    "shell_jump_kernel",
    "trace_measure",
    "trace_sequence",
    "richardson_limit",
    "normal_derivative_dV",
    "kernel_derivative",
    "k_sigma",
    "ed_limit",
    "ed_operator_check",
]

EPS_LADDER = (1e-2, 1e-3, 1e-4)
N_MOMENTS = 5


class LimitError(ArithmeticError):
    """A boundary limit did not settle under refinement of the approach distance."""


@dataclass
class TraceEstimate:
    """Trace masses along the exhaustion and the angular moments at the last level.

    ``moments`` are Legendre moments in d = 3 and cosine moments in d = 2,
    orders 0 to 4, of the angular projection of the measure.
    """

    total_mass_sequence: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    converged: bool = False

    @property
    def angular_density(self) -> np.ndarray:
        return np.asarray(self.moments[-1] if self.moments else np.zeros(N_MOMENTS))

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.total_mass_sequence])


@dataclass
class EDReport:
    points: list
    e_values: list
    mass_from_e: float
    trace_mass: float
    mass_residual: float
    spread: float


# ---------------------------------------------------------------------------
# trace measure


def shell_jump_kernel(model: StableModel, s, rho):
    """Integral of j(|s e - rho w|) over unit vectors w, for s < rho.

    Uses the Euler-transformed hypergeometric form, which stays accurate as
    s approaches rho where the kernel blows up like (rho - s)^(-1-alpha).
    """
    d, a = model.dim, model.alpha
    s = np.asarray(s, dtype=float)
    rho = np.asarray(rho, dtype=float)
    z = (s / rho) ** 2
    nu = d + a
    hyp = hyp2f1(-a / 2, (d - 2 - a) / 2, d / 2, z)
    return model.levy_const * sphere_area(d) * rho ** (-nu) * (1 - z) ** (-1 - a) * hyp


def _shell_rule(width: float, depth: int):
    # graded toward both ends of the shell: the sphere (u may blow up) and the
    # inner sphere (kernel singularity)
    br = graded_breaks(0.0, width, left=True, right=True, bulk=8, depth=depth)
    return gk_panels(br)


def trace_measure(model: StableModel, ball: Ball, u: ScalarField, k: int, *, tol: float = 1e-7,
                  depth: int = 40) -> tuple[float, np.ndarray]:
    """Total mass of eta_{U_k} u and its angular moments, for a radial field u.

    The inner integral over the shell R(1 - 2^-k) < |y| < R reduces to one
    radial integral against ``shell_jump_kernel``; the outer integral over
    U_k is radial against the Green function of U_k at its center.
    """
    check_model_ball(model, ball)
    if not u.is_radial:
        raise ValueError("trace_measure needs a radial field")
    if k < 1:
        raise ValueError("shrink index k must be at least 1")
    d = model.dim
    R = ball.radius
    rk = R * (1 - 2.0**-k)
    width = R - rk
    dl, wd, _ = _shell_rule(width, depth)
    rho = R - dl
    uv = np.asarray(u.radial(dl), dtype=float)
    if not np.all(np.isfinite(uv)):
        raise DivergenceError("field is not finite on the shell")
    inner_w = wd * rho ** (d - 1) * uv

    def outer(s):
        s = np.asarray(s, dtype=float)
        jk = shell_jump_kernel(model, s[:, None], rho[None, :]) @ inner_w
        g = green_from_geometry(model, rk, rk * rk, (rk - s) * (rk + s), s)
        return sphere_area(d) * s ** (d - 1) * g * jk

    res = integrate_interval(outer, 0.0, rk, left=True, right=True, tol=tol)
    mass = res.value
    if not math.isfinite(mass):
        raise DivergenceError("trace mass is not finite")
    moments = np.zeros(N_MOMENTS)
    moments[0] = mass
    return mass, moments


def trace_sequence(model: StableModel, ball: Ball, u: ScalarField, ks: Sequence[int] = (2, 4, 6, 8),
                   rtol: float = 0.02) -> TraceEstimate:
    """Trace masses for several shrink indices.

    Converged when the last two masses differ by less than ``rtol`` of the
    larger one, or both are below ``rtol`` times the first mass.
    """
    est = TraceEstimate()
    for k in ks:
        mass, mom = trace_measure(model, ball, u, k)
        est.total_mass_sequence.append((k, mass))
        est.moments.append(mom.tolist())
    m = est.masses
    if len(m) >= 2:
        gap = abs(m[-1] - m[-2])
        est.converged = bool(gap <= rtol * max(abs(m[-1]), abs(m[-2]))
                             or max(abs(m[-1]), abs(m[-2])) <= rtol * abs(m[0]))
    return est


# ---------------------------------------------------------------------------
# boundary limits


def richardson_limit(eps: Sequence[float], values: Sequence[float], rtol: float = 0.01) -> float:
    """First-order Richardson limit from three samples at geometric distances.

    Two extrapolants are formed from consecutive pairs; they must agree to
    ``rtol`` relative to the larger of their size and the sample size.
    """
    e = np.asarray(eps, dtype=float)
    q = np.asarray(values, dtype=float)
    if e.size != 3 or q.size != 3:
        raise ValueError("three samples are needed")
    if not np.all(np.isfinite(q)):
        raise LimitError("non-finite samples")
    r1 = e[0] / e[1]
    r2 = e[1] / e[2]
    l12 = (r1 * q[1] - q[0]) / (r1 - 1)
    l23 = (r2 * q[2] - q[1]) / (r2 - 1)
    # the sample scale covers limits that vanish while the samples do not
    scale = max(abs(l23), abs(l12), float(np.max(np.abs(q))))
    if abs(l23 - l12) > rtol * scale:
        raise LimitError(f"boundary limit is not Cauchy: extrapolants {l12:.6g} and {l23:.6g}")
    return float(l23)


def _sphere_point(ball: Ball, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    rel = z - ball.center_array
    if abs(np.linalg.norm(rel) - ball.radius) > 1e-9 * ball.radius:
        raise DomainError("z must lie on the boundary sphere")
    return rel / np.linalg.norm(rel)


def _support_gap(ball: Ball, psi: ScalarField) -> float:
    if psi.support is None:
        raise ValueError("psi needs a support ball")
    c = np.linalg.norm(psi.support.center_array - ball.center_array)
    return ball.radius - c - psi.support.radius


def normal_derivative_dV(model: StableModel, ball: Ball, psi: ScalarField, z,
                         eps: Sequence[float] = EPS_LADDER, tol: float = 1e-9) -> float:
    """Limit of G_D psi(y) / V(delta(y)) as y tends to z along the radius.

    ``psi`` must carry a support ball at positive distance from the sphere,
    larger than the approach distances used.
    """
    check_model_ball(model, ball)
    e = _sphere_point(ball, z)
    gap = _support_gap(ball, psi)
    R = ball.radius
    if gap <= 2 * max(eps) * R:
        raise DomainError("support of psi is too close to the sphere")
    vals = []
    for ep in eps:
        x = ball.center_array + (1 - ep) * R * e
        g = green_potential(model, ball, psi, x, tol=tol)
        vals.append(g / renewal_eval(model, ep * R))
    return richardson_limit(eps, vals)


def kernel_derivative(model: StableModel, ball: Ball, psi: ScalarField, z, tol: float = 1e-9) -> float:
    """int_D K_D(y, z) psi(y) dy with the modified Martin kernel, over the support of psi."""
    check_model_ball(model, ball)
    zz = ball.center_array + ball.radius * _sphere_point(ball, z)
    if _support_gap(ball, psi) <= 0:
        raise DomainError("support of psi must lie inside the ball")

    def integrand(pts):
        vals = psi(pts, ball)
        return modified_martin(model, ball, pts, np.broadcast_to(zz, pts.shape)) * vals

    return integrate_ball(integrand, ball, None, tol, region=psi.support).value


def k_sigma(model: StableModel, ball: Ball, delta) -> np.ndarray:
    """K_D sigma at boundary distance delta, in closed form.

    Integrating |x - z|^(-d) over the sphere gives |S| R / (R^2 - |x|^2).
    """
    R = ball.radius
    delta = np.asarray(delta, dtype=float)
    ax = delta * (2 * R - delta)
    return modified_martin_const(model, R) * sphere_area(model.dim) * R * ax ** (model.half - 1)


def ed_limit(model: StableModel, ball: Ball, u: ScalarField, z, eps: Sequence[float] = EPS_LADDER) -> float:
    """E_D u(z): limit of u(x) / K_D sigma(x) as x tends to z along the radius."""
    e = _sphere_point(ball, z)
    R = ball.radius
    vals = []
    for ep in eps:
        x = ball.center_array + (1 - ep) * R * e
        ux = float(np.asarray(u(x[None, :], ball)).ravel()[0])
        vals.append(ux / float(k_sigma(model, ball, ep * R)))
    return richardson_limit(eps, vals)


def ed_operator_check(model: StableModel, ball: Ball, u: ScalarField, z_set, k: int = 8,
                      trace_mass: float | None = None) -> EDReport:
    """Compare E_D u(z) K_D(x0, z) sigma(dz) with the trace of u.

    For radial u the predicted mass is |S| R^(d-1) E K_D(x0, z) and the
    trace mass at level k is computed here; otherwise the predicted mass is a
    sphere integral and ``trace_mass`` must be supplied for a comparison.
    """
    check_model_ball(model, ball)
    R = ball.radius
    d = model.dim
    x0 = ball.center_array
    pts = [np.asarray(z, dtype=float) for z in z_set]
    e_vals = [ed_limit(model, ball, u, z) for z in pts]
    k0 = [modified_martin(model, ball, x0, z) for z in pts]
    dens = np.array(e_vals) * np.array(k0)
    scale = max(float(np.max(np.abs(dens))), 1e-300)
    spread = float((np.max(dens) - np.min(dens)) / scale) if len(dens) > 1 else 0.0
    if u.is_radial:
        mass_e = sphere_area(d) * R ** (d - 1) * float(np.mean(dens))
        if trace_mass is None:
            trace_mass = trace_measure(model, ball, u, k)[0]
    else:
        def h(zs):
            flat = zs.reshape(-1, d)
            out = np.array([ed_limit(model, ball, u, zz) * modified_martin(model, ball, x0, zz) for zz in flat])
            return out.reshape(zs.shape[:-1])

        mass_e = integrate_sphere(h, ball, tol=1e-3, budget=2000).value
    if trace_mass is None:
        resid = float("nan")
    else:
        den = max(abs(mass_e), abs(trace_mass))
        resid = 0.0 if den == 0 else abs(mass_e - trace_mass) / den
    return EDReport([p.tolist() for p in pts], e_vals, float(mass_e),
                    float("nan") if trace_mass is None else float(trace_mass), float(resid), spread)

"""Green, Poisson, Martin and modified Martin kernels of the stable process killed on a ball.

Closed forms are written in terms of ``R^2 - |x|^2`` computed as
``delta * (2R - delta)`` so that points very close to the sphere keep their
relative accuracy.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .levy import DomainError, StableModel, sphere_area
from .quadrature import Ball, integrate_interval

__all__ = [
    "Ball",
    "SingularityError",
    "BoundaryBlowupError",
    "BOUNDARY_TOL",
    "green",
    "green_from_geometry",
    "green_integral",
    "poisson",
    "martin",
    "modified_martin",
    "modified_martin_const",
    "killing",
    "chord_length",
    "check_model_ball",
]

BOUNDARY_TOL = 1e-12


class SingularityError(DomainError):
    """Kernel evaluated on its diagonal."""


class BoundaryBlowupError(DomainError):
    """Kernel evaluated at a boundary point where it is infinite."""


def check_model_ball(model: StableModel, ball: Ball) -> None:
    if model.dim != ball.dim:
        raise DomainError(f"model dimension {model.dim} does not match ball dimension {ball.dim}")


def green_integral(model: StableModel, r0):
    """The incomplete integral of s^(alpha/2-1) (1+s)^(-d/2) over [0, r0].

    With w = s / (1 + s) it becomes a regularized incomplete beta function
    with parameters (alpha/2, (d-alpha)/2).
    """
    a = model.alpha / 2
    b = (model.dim - model.alpha) / 2
    r0 = np.asarray(r0, dtype=float)
    w = np.where(np.isinf(r0), 1.0, r0 / (1.0 + np.where(np.isinf(r0), 0.0, r0)))
    return beta_fn(a, b) * betainc(a, b, w)


def green_from_geometry(model: StableModel, radius: float, ax, ay, dist):
    """Green function from ``R^2-|x|^2``, ``R^2-|y|^2`` and ``|x-y|``.

    Works on broadcastable arrays; no domain checks.
    """
    ax = np.asarray(ax, dtype=float)
    ay = np.asarray(ay, dtype=float)
    dist = np.asarray(dist, dtype=float)
    a = model.alpha / 2
    b = (model.dim - model.alpha) / 2
    num = ax * ay
    w = num / (radius * radius * dist * dist + num)
    return model.green_const * dist ** (model.alpha - model.dim) * beta_fn(a, b) * betainc(a, b, w)


def _radial(ball: Ball, pts) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pts, dtype=float)
    if p.shape[-1] != ball.dim:
        raise DomainError("point dimension does not match the ball")
    rel = p - ball.center_array
    r = np.linalg.norm(rel, axis=-1)
    return rel, r


def _scalar(out):
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


def green(model: StableModel, ball: Ball, x, y):
    """Green function of the ball, zero when either point lies outside.

    Raises ``SingularityError`` when x = y.
    """
    check_model_ball(model, ball)
    R = ball.radius
    xr, rx = _radial(ball, x)
    yr, ry = _radial(ball, y)
    dist = np.linalg.norm(xr - yr, axis=-1)
    if np.any(dist == 0):
        raise SingularityError("Green function is singular on the diagonal")
    dx = R - rx
    dy = R - ry
    inside = (dx > 0) & (dy > 0)
    ax = np.where(inside, dx * (2 * R - dx), 1.0)
    ay = np.where(inside, dy * (2 * R - dy), 1.0)
    val = green_from_geometry(model, R, ax, ay, dist)
    return _scalar(np.where(inside, val, 0.0))


def poisson(model: StableModel, ball: Ball, x, z):
    """Poisson kernel: density of the exit position at z for the process started at x."""
    check_model_ball(model, ball)
    R = ball.radius
    xr, rx = _radial(ball, x)
    zr, rz = _radial(ball, z)
    if np.any(rx >= R):
        raise DomainError("x must lie strictly inside the ball")
    dz = rz - R
    if np.any(np.abs(dz) <= BOUNDARY_TOL * R):
        raise BoundaryBlowupError("Poisson kernel is infinite on the boundary")
    if np.any(dz < 0):
        raise DomainError("z must lie strictly outside the closed ball")
    dx = R - rx
    ax = dx * (2 * R - dx)
    az = dz * (2 * R + dz)
    dist = np.linalg.norm(xr - zr, axis=-1)
    val = model.poisson_const * (ax / az) ** model.half * dist ** (-model.dim)
    return _scalar(val)


def _check_sphere(ball: Ball, z) -> tuple[np.ndarray, np.ndarray]:
    zr, rz = _radial(ball, z)
    if np.any(np.abs(rz - ball.radius) > BOUNDARY_TOL * ball.radius):
        raise DomainError("z must lie on the boundary sphere")
    return zr, rz


def martin(model: StableModel, ball: Ball, x, z):
    """Martin kernel normalized to one at the center."""
    check_model_ball(model, ball)
    R = ball.radius
    xr, rx = _radial(ball, x)
    zr, _ = _check_sphere(ball, z)
    if np.any(rx >= R):
        raise DomainError("x must lie strictly inside the ball")
    dx = R - rx
    ax = dx * (2 * R - dx)
    dist = np.linalg.norm(xr - zr, axis=-1)
    return _scalar(ax ** model.half * R ** (model.dim - model.alpha) * dist ** (-model.dim))


def modified_martin_const(model: StableModel, radius: float) -> float:
    """Constant c in K(x, z) = c (R^2-|x|^2)^(alpha/2) |x-z|^(-d).

    Leading term of the Green closed form as r0 -> 0 is (2/alpha) r0^(alpha/2),
    and R^2 - |y|^2 ~ 2 R delta(y) as y approaches the sphere.
    """
    return model.green_const * (2.0 / model.alpha) * (2.0 / radius) ** model.half


def modified_martin(model: StableModel, ball: Ball, x, z):
    """Boundary limit of G(x, y) / V(delta(y)) as y tends to z."""
    check_model_ball(model, ball)
    R = ball.radius
    xr, rx = _radial(ball, x)
    zr, _ = _check_sphere(ball, z)
    if np.any(rx >= R):
        raise DomainError("x must lie strictly inside the ball")
    dx = R - rx
    ax = dx * (2 * R - dx)
    dist = np.linalg.norm(xr - zr, axis=-1)
    return _scalar(modified_martin_const(model, R) * ax ** model.half * dist ** (-model.dim))


def chord_length(rho, delta, radius: float, cos_angle):
    """Distance from a point at radius rho to the sphere along a ray.

    ``cos_angle`` is measured from the outward radial direction and
    ``delta = radius - rho``.  The two algebraic forms avoid cancellation.
    """
    rho = np.asarray(rho, dtype=float)
    c = np.asarray(cos_angle, dtype=float)
    num = delta * (2 * radius - delta)
    root = np.sqrt(np.maximum(radius * radius - rho * rho * (1 - c * c), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        out_fwd = num / (rho * c + root)
    out_bwd = -rho * c + root
    return np.where(c >= 0, out_fwd, out_bwd)


def killing(model: StableModel, ball: Ball, x, tol: float = 1e-10):
    """Exterior mass of the jump kernel seen from x.

    Integrating the radial part in closed form leaves
    (C / alpha) times the angular integral of chord^(-alpha).
    """
    check_model_ball(model, ball)
    R = ball.radius
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    _, rx = _radial(ball, xs)
    if np.any(rx >= R * (1 - BOUNDARY_TOL)):
        raise DomainError("killing function needs x strictly inside the ball")
    out = np.empty(rx.shape[0])
    d, a = model.dim, model.alpha
    for i, (rho, dl) in enumerate(zip(rx, R - rx)):
        if rho == 0:
            out[i] = model.levy_const / a * sphere_area(d) * R ** (-a)
            continue

        def f(th, rho=rho, dl=dl):
            ch = chord_length(rho, dl, R, np.cos(th))
            w = 2 * math.pi * np.sin(th) if d == 3 else 2.0
            return w * ch ** (-a)

        res = integrate_interval(f, 0.0, math.pi, left=True, tol=tol)
        out[i] = model.levy_const / a * res.value
    return float(out[0]) if np.ndim(x) == 1 else out


def killing_radial(model: StableModel, radius: float, deltas) -> np.ndarray:
    """Vectorized killing function at boundary distances ``deltas``.

    Same angular reduction as ``killing`` with one fixed graded rule shared by
    all points, for use inside other quadratures.
    """
    from .quadrature import gk_panels, graded_breaks

    dl = np.atleast_1d(np.asarray(deltas, dtype=float))
    R = radius
    br = graded_breaks(0.0, math.pi, left=True, bulk=16, depth=24)
    th, wk, _ = gk_panels(br)
    c = np.cos(th)
    rho = R - dl
    ch = chord_length(rho[:, None], dl[:, None], R, c[None, :])
    w = 2 * math.pi * np.sin(th) if model.dim == 3 else 2.0 * np.ones_like(th)
    return model.levy_const / model.alpha * np.sum(ch ** (-model.alpha) * (w * wk)[None, :], axis=1)

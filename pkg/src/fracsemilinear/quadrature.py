"""Graded Gauss-Kronrod quadrature on intervals, balls, ball exteriors and spheres.

Every rule here is a composite 7/15-point Gauss-Kronrod rule on panels that
are geometrically graded toward endpoint or interior singularities.  Higher
dimensional rules are tensor products in polar coordinates; the Gauss nodes
are a subset of the Kronrod nodes, so each call returns a nested-rule error
estimate at no extra cost.  Refinement is global (more bulk panels, deeper
grading) and the node order is fixed, which makes every result a
deterministic function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadratureResult",
    "QuadratureBudgetError",
    "DivergenceError",
    "SingularitySpec",
    "Ball",
    "gk_panels",
    "graded_breaks",
    "integrate_interval",
    "integrate_ball",
    "integrate_exterior",
    "integrate_sphere",
    "pairwise_sum",
    "appendix_identity",
]

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# reference nodes on [-1, 1], ascending
_REF_X = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
_REF_WK = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_REF_WG = np.zeros(15)
for _k, _i in enumerate((1, 3, 5)):
    _REF_WG[_i] = _WG[_k]
    _REF_WG[14 - _i] = _WG[_k]
_REF_WG[7] = _WG[3]


class QuadratureBudgetError(RuntimeError):
    """The error target was not met within the evaluation budget."""

    def __init__(self, message: str, best: "QuadratureResult"):
        super().__init__(message)
        self.best = best


class DivergenceError(ArithmeticError):
    """The requested integral is infinite."""


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


@dataclass(frozen=True)
class SingularitySpec:
    """Integrand behaves like ``|y - location|^(-exponent)`` near ``location``."""

    location: np.ndarray
    exponent: float
    kind: str = "interior-point"

    def __post_init__(self) -> None:
        if self.kind not in ("interior-point", "boundary-power"):
            raise ValueError(f"unknown singularity kind {self.kind!r}")


@dataclass(frozen=True)
class Ball:
    """Euclidean ball used as the computational domain."""

    center: tuple
    radius: float

    def __post_init__(self) -> None:
        c = tuple(float(v) for v in self.center)
        if not (self.radius > 0) or not math.isfinite(self.radius):
            raise ValueError("radius must be positive and finite")
        if len(c) not in (2, 3):
            raise ValueError("ball center must have 2 or 3 coordinates")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def diam(self) -> float:
        return 2.0 * self.radius

    @classmethod
    def unit(cls, dim: int, radius: float = 1.0) -> "Ball":
        return cls(center=(0.0,) * dim, radius=radius)

    def delta(self, points) -> np.ndarray:
        """Distance to the boundary for interior points (negative outside)."""
        p = np.asarray(points, dtype=float)
        return self.radius - np.linalg.norm(p - self.center_array, axis=-1)

    def delta_ext(self, points) -> np.ndarray:
        """Distance to the boundary for exterior points (negative inside)."""
        return -self.delta(points)


def pairwise_sum(values: np.ndarray) -> float:
    """Cascade summation in a fixed order."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


def gk_panels(breaks: Sequence[float]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Composite Kronrod nodes and Kronrod/Gauss weights over sorted breakpoints."""
    b = np.asarray(breaks, dtype=float)
    lo, hi = b[:-1], b[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * _REF_X[None, :]).ravel()
    wk = (half[:, None] * _REF_WK[None, :]).ravel()
    wg = (half[:, None] * _REF_WG[None, :]).ravel()
    return nodes, wk, wg


def graded_breaks(
    a: float,
    b: float,
    *,
    left: bool = False,
    right: bool = False,
    interior: Sequence[float] = (),
    plain: Sequence[float] = (),
    bulk: int = 4,
    ratio: float = 0.2,
    depth: int = 18,
    floor: float = 0.0,
) -> np.ndarray:
    """Breakpoints on [a, b] graded geometrically toward the requested points.

    ``interior`` points are graded from both sides; ``plain`` points are
    inserted as ordinary breakpoints (kinks) without grading.

    Grading stops after ``depth`` levels, once a panel is narrower than
    ``floor * max(1, |a|, |b|)``, or once its nodes would no longer be
    distinguishable from the focus point in floating point.
    """
    if not b > a:
        raise ValueError("empty interval")
    scale = max(1.0, abs(a), abs(b))
    tiny = floor * scale
    pts = set(np.linspace(a, b, bulk + 1).tolist())
    cuts = sorted(c for c in interior if a < c < b)
    pts.update(cuts)
    pts.update(c for c in plain if a < c < b)
    base = np.array(sorted(pts))
    foci = []
    if left:
        foci.append((a, 1))
    if right:
        foci.append((b, -1))
    for c in cuts:
        foci.append((c, 1))
        foci.append((c, -1))
    extra = []
    for c, side in foci:
        if side > 0:
            nxt = base[base > c]
            h = (nxt[0] - c) if nxt.size else 0.0
        else:
            prv = base[base < c]
            h = (c - prv[-1]) if prv.size else 0.0
        tiny_c = max(tiny, 4e3 * np.spacing(abs(c)))
        k = 1
        while k <= depth and h * ratio**k > tiny_c:
            extra.append(c + side * h * ratio**k)
            k += 1
    out = np.unique(np.concatenate([base, extra]))
    return out


def _level_params(level: int, bulk0: int, depth0: int) -> tuple[int, int]:
    return bulk0 * 2**level, depth0 + 6 * level


def _converged(q: float, err: float, tol: float) -> bool:
    return err <= max(tol * abs(q), tol) or err == 0.0


def integrate_interval(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    left: bool = False,
    right: bool = False,
    interior: Sequence[float] = (),
    tol: float = 1e-10,
    budget: int = 10**6,
    bulk: int = 4,
    depth: int = 12,
    abs_floor: float | None = None,
) -> QuadratureResult:
    """Integrate a vectorized ``f`` over [a, b] with graded composite Kronrod rules."""
    if a == b:
        return QuadratureResult(0.0, 0.0, 0)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
        left, right = right, left
    used = 0
    best = None
    for level in range(12):
        nb, dp = _level_params(level, bulk, depth)
        br = graded_breaks(a, b, left=left, right=right, interior=interior, bulk=nb, depth=dp)
        x, wk, wg = gk_panels(br)
        vals = np.asarray(f(x), dtype=float)
        used += x.size
        if not np.all(np.isfinite(vals)):
            raise DivergenceError("non-finite integrand values")
        q = pairwise_sum(wk * vals)
        err = abs(q - pairwise_sum(wg * vals))
        if best is not None:
            err = min(err, abs(sign * q - best.value))
        best = QuadratureResult(sign * q, err, used)
        target = tol if abs_floor is None else abs_floor
        if (level > 0 or err == 0.0) and err <= max(tol * abs(q), target):
            return best
        if used > budget:
            break
    raise QuadratureBudgetError("interval quadrature budget exhausted", best)


def integrate_from_zero(fn, upper: float, e1: float, span: float = 40.0, tol: float = 1e-9) -> float:
    """int_0^upper fn for fn locally like t^(e1 - 1) near 0, with e1 > 0.

    Quadrature in log t over [upper e^-span, upper] plus the power-law head,
    which stays accurate when e1 is small and grading in t converges slowly.
    """
    if not e1 > 0:
        raise DivergenceError("integrand is not integrable at zero")
    lo = upper * math.exp(-span)

    def body(x):
        t = np.exp(x)
        return fn(t) * t

    core = integrate_interval(body, math.log(lo), math.log(upper), tol=tol, abs_floor=1e-300).value
    head = float(fn(np.asarray(lo))) * lo / e1
    return core + head


def appendix_identity(a: float, b: float, d: int) -> float:
    """Closed form of the integral of s^(d-2) / (b + s)^d over [0, a]."""
    return (1.0 + b / a) ** (1 - d) / (b * (d - 1))


# ---------------------------------------------------------------------------
# polar tensor rules


def _frame(axis: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal frame whose first vector is ``axis``."""
    e = axis / np.linalg.norm(axis)
    if dim == 2:
        return np.array([e, [-e[1], e[0]]])
    trial = np.eye(3)[int(np.argmin(np.abs(e)))]
    u = trial - e * (trial @ e)
    u /= np.linalg.norm(u)
    v = np.cross(e, u)
    return np.array([e, u, v])


class _AngularRule:
    """Directions with Kronrod and Gauss weights for the three angular layouts."""

    def __init__(self, dim: int, axis: np.ndarray, level: int, axisymmetric: bool, graded: bool):
        nb, dp = _level_params(level, 2, 10)
        frame = _frame(axis, dim)
        if dim == 2:
            if axisymmetric:
                br = graded_breaks(0.0, math.pi, left=graded, bulk=nb, depth=dp)
                th, wk, wg = gk_panels(br)
                wk, wg = 2.0 * wk, 2.0 * wg
            else:
                br = graded_breaks(-math.pi, math.pi, interior=(0.0,) if graded else (), bulk=2 * nb, depth=dp)
                th, wk, wg = gk_panels(br)
            self.dirs = np.cos(th)[:, None] * frame[0] + np.sin(th)[:, None] * frame[1]
            self.shape = (th.size,)
            self.wk, self.wg_list = wk, [wg]
            self.cos = np.cos(th)
            return
        br = graded_breaks(0.0, math.pi, left=graded, bulk=nb, depth=dp)
        th, wk, wg = gk_panels(br)
        st = np.sin(th)
        if axisymmetric:
            self.dirs = np.cos(th)[:, None] * frame[0] + st[:, None] * frame[1]
            self.shape = (th.size,)
            self.wk, self.wg_list = 2 * math.pi * st * wk, [2 * math.pi * st * wg]
            self.cos = np.cos(th)
            return
        nphi = 16 * 2**level
        ph = 2 * math.pi * np.arange(nphi) / nphi
        wph = np.full(nphi, 2 * math.pi / nphi)
        wph_half = np.where(np.arange(nphi) % 2 == 0, 4 * math.pi / nphi, 0.0)
        ct = np.cos(th)
        d = (ct[:, None, None] * frame[0]
             + (st[:, None] * np.cos(ph)[None, :])[:, :, None] * frame[1]
             + (st[:, None] * np.sin(ph)[None, :])[:, :, None] * frame[2])
        self.dirs = d.reshape(-1, 3)
        self.shape = (th.size, nphi)
        self.wk = (st * wk)[:, None] * wph[None, :]
        self.wg_list = [(st * wg)[:, None] * wph[None, :], (st * wk)[:, None] * wph_half[None, :]]
        self.wk = self.wk.ravel()
        self.wg_list = [w.ravel() for w in self.wg_list]
        self.cos = np.repeat(ct, nphi)


def _tensor_eval(
    f: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    w_radial_k: np.ndarray,
    w_radial_g: np.ndarray,
    ang: _AngularRule,
    chunk: int = 400_000,
) -> tuple[float, float]:
    """Sum over a (radial x angular) tensor with nested error estimate.

    ``points`` has shape (n_rad, n_ang, d) and the radial weights are per
    (radial, angular) node because radial extents vary with direction.
    """
    nr, na, d = points.shape
    flat = points.reshape(-1, d)
    vals = np.empty(flat.shape[0])
    for s in range(0, flat.shape[0], chunk):
        vals[s:s + chunk] = f(flat[s:s + chunk])
    vals = vals.reshape(nr, na)
    if not np.all(np.isfinite(vals)):
        raise DivergenceError("non-finite integrand values")
    wk = w_radial_k * ang.wk[None, :]
    q = pairwise_sum(wk * vals)
    err = abs(q - pairwise_sum(w_radial_g * ang.wk[None, :] * vals))
    for wg in ang.wg_list:
        err += abs(q - pairwise_sum(w_radial_k * wg[None, :] * vals))
    return q, err


def _refine_loop(run, tol: float, budget: int, what: str) -> QuadratureResult:
    used = 0
    best = None
    prev = None
    for level in range(8):
        q, err, n = run(level)
        used += n
        if prev is not None:
            err = min(err, abs(q - prev)) if err > 0 else abs(q - prev)
        prev = q
        best = QuadratureResult(q, err, used)
        if level > 0 and _converged(q, err, tol):
            return best
        if level == 0 and err == 0.0:
            return best
        if used > budget:
            break
    raise QuadratureBudgetError(f"{what} quadrature budget exhausted", best)


def integrate_ball(
    f: Callable[[np.ndarray], np.ndarray],
    ball: Ball,
    sing: SingularitySpec | None = None,
    tol: float = 1e-6,
    *,
    axisymmetric: bool = False,
    budget: int = 10**6,
    region: Ball | None = None,
) -> QuadratureResult:
    """Integrate ``f(points)`` over a ball in polar coordinates.

    The polar origin is the singular point when one is given, otherwise the
    center.  ``region`` restricts integration to a smaller ball contained in
    ``ball`` (for compactly supported integrands).  With ``axisymmetric`` the
    integrand is assumed symmetric about the line through the polar origin
    and the region center, which removes one angular dimension in 3-d.
    """
    dom = region if region is not None else ball
    d = dom.dim
    c = dom.center_array
    R = dom.radius
    if sing is not None:
        if sing.kind == "interior-point" and not sing.exponent < d:
            raise DivergenceError("point singularity is not integrable")
        p = np.asarray(sing.location, dtype=float)
        if np.linalg.norm(p - c) >= R:
            p = c
            singular = False
        else:
            singular = True
    else:
        p = c
        singular = False
    q = p - c
    rq = float(np.linalg.norm(q))
    axis = q if rq > 1e-14 * R else np.eye(d)[0]
    graded_ang = rq > 1e-14 * R

    def run(level: int):
        ang = _AngularRule(d, axis, level, axisymmetric, graded_ang)
        nb, dp = _level_params(level, 4, 12)
        br = graded_breaks(0.0, 1.0, left=singular, right=True, bulk=nb, depth=dp)
        t, wk, wg = gk_panels(br)
        cosang = ang.dirs @ (q / rq) if rq > 0 else np.zeros(ang.dirs.shape[0])
        smax = -rq * cosang + np.sqrt(np.maximum(R * R - rq * rq * (1 - cosang**2), 0.0))
        s = t[:, None] * smax[None, :]
        pts = p[None, None, :] + s[:, :, None] * ang.dirs[None, :, :]
        jac = s ** (d - 1) * smax[None, :]
        qv, err = _tensor_eval(f, pts, wk[:, None] * jac, wg[:, None] * jac, ang)
        return qv, err, pts.shape[0] * pts.shape[1]

    return _refine_loop(run, tol, budget, "ball")


def integrate_exterior(
    g: Callable[[np.ndarray], np.ndarray],
    ball: Ball,
    decay_exponent: float,
    tol: float = 1e-6,
    *,
    focus: np.ndarray | None = None,
    axisymmetric: bool = False,
    budget: int = 10**6,
    outer: float | None = None,
) -> QuadratureResult:
    """Integrate ``g`` over the complement of a ball.

    The exterior is split into a boundary shell ``R < |z| < 2R`` graded toward
    the sphere and a far zone mapped onto (0, 1] by ``|z| = 2R / t``.
    ``focus`` is a direction toward which the angular rule is graded, used
    when the integrand peaks near one boundary point.  ``outer`` truncates
    the integration at a finite radius instead.
    """
    d = ball.dim
    if not decay_exponent > d:
        raise DivergenceError("integrand tail is not integrable at infinity")
    c = ball.center_array
    R = ball.radius
    axis = np.asarray(focus, dtype=float) if focus is not None else np.eye(d)[0]
    graded_ang = focus is not None
    mid = 2.0 * R if outer is None else min(2.0 * R, outer)

    def run(level: int):
        ang = _AngularRule(d, axis, level, axisymmetric, graded_ang)
        nb, dp = _level_params(level, 4, 12)
        # stop grading before R + offset rounds to R
        br = graded_breaks(0.0, mid - R, left=True, bulk=nb, depth=dp, floor=1e-13)
        off, wk1, wg1 = gk_panels(br)
        rho1 = R + off
        jac1 = rho1 ** (d - 1)
        parts_rho = [rho1]
        parts_wk = [wk1 * jac1]
        parts_wg = [wg1 * jac1]
        if outer is None or outer > mid:
            if outer is None:
                br2 = graded_breaks(0.0, 1.0, left=True, bulk=nb, depth=dp)
                t, wk2, wg2 = gk_panels(br2)
                rho2 = mid / t
                jac2 = rho2 ** (d - 1) * mid / t**2
            else:
                br2 = graded_breaks(mid, outer, bulk=nb, depth=dp)
                rho2, wk2, wg2 = gk_panels(br2)
                jac2 = rho2 ** (d - 1)
            parts_rho.append(rho2)
            parts_wk.append(wk2 * jac2)
            parts_wg.append(wg2 * jac2)
        rho = np.concatenate(parts_rho)
        wk = np.concatenate(parts_wk)
        wg = np.concatenate(parts_wg)
        pts = c[None, None, :] + rho[:, None, None] * ang.dirs[None, :, :]
        na = ang.dirs.shape[0]
        qv, err = _tensor_eval(g, pts, np.repeat(wk[:, None], na, 1), np.repeat(wg[:, None], na, 1), ang)
        return qv, err, pts.shape[0] * na

    return _refine_loop(run, tol, budget, "exterior")


def integrate_sphere(
    h: Callable[[np.ndarray], np.ndarray],
    ball: Ball,
    tol: float = 1e-6,
    *,
    focus: np.ndarray | None = None,
    axisymmetric: bool = False,
    budget: int = 10**6,
) -> QuadratureResult:
    """Surface integral of ``h`` over the boundary sphere of ``ball``."""
    d = ball.dim
    c = ball.center_array
    R = ball.radius
    axis = np.asarray(focus, dtype=float) if focus is not None else np.eye(d)[0]
    graded_ang = focus is not None

    def run(level: int):
        ang = _AngularRule(d, axis, level, axisymmetric, graded_ang)
        pts = c[None, None, :] + R * ang.dirs[None, :, :]
        one = np.full((1, ang.dirs.shape[0]), R ** (d - 1))
        qv, err = _tensor_eval(h, pts, one, one, ang)
        # the radial factor is exact, so drop its (zero) contribution
        return qv, err, ang.dirs.shape[0]

    return _refine_loop(run, tol, budget, "sphere")

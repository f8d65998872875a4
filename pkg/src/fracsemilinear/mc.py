"""Walk-on-spheres Monte Carlo for the stable process in a ball.

Every step recenters: from the current point x the process is run until it
leaves the largest ball B(x, r) inside D, r = delta(x).  Only the exit law
from the center of a ball is needed, and by scaling only for radius one:
the radial part has density |S| C_P rho^(-1) (rho^2 - 1)^(-alpha/2) on
(1, inf) and the direction is uniform.  The radial law is sampled from an
inverse-CDF table built once per (alpha, d).

Random streams: the paths are cut into fixed chunks of ``CHUNK`` paths and
chunk i uses ``SeedSequence(seed).spawn(n_chunks)[i]``, so results do not
depend on how chunks are scheduled.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import norm

from .levy import StableModel, sphere_area
from .potentials import ExteriorDensity, ScalarField, exit_time_exact
from .quadrature import Ball, gk_panels, graded_breaks

__all__ = [
    "WoSConfig",
    "MCEstimate",
    "MCBiasError",
    "ExitTable",
    "exit_table",
    "sample_exit_ball",
    "wos_poisson",
    "wos_green",
    "CHUNK",
]

CHUNK = 1 << 14
TABLE_NODES = 10_000
WARN_TRUNCATION = 1e-4
FAIL_TRUNCATION = 1e-2


class MCBiasError(RuntimeError):
    """Too many paths hit the step cap for the estimate to be trusted."""


@dataclass(frozen=True)
class WoSConfig:
    samples: int = 100_000
    max_steps: int = 10_000
    seed: int = 0
    confidence: float = 0.95

    def __post_init__(self) -> None:
        if int(self.samples) < 1 or int(self.max_steps) < 1:
            raise ValueError("samples and max_steps must be at least 1")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    truncated_fraction: float
    samples: int
    interval: tuple
    median_steps: float

    def agrees_with(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.std_error


# ---------------------------------------------------------------------------
# exit law from the center of the unit ball


@dataclass(frozen=True)
class ExitTable:
    """Inverse CDF of |Z| for exit from the unit ball started at its center.

    The lower half of the probability range is interpolated as log(rho - 1)
    against log F, the upper half as log(rho) against log(1 - F), both with
    monotone cubic interpolation on ``TABLE_NODES`` log-spaced nodes.  Beyond
    the table the leading power behavior is inverted in closed form.
    """

    alpha: float
    k0: float
    t_nodes: np.ndarray
    cdf: np.ndarray
    ccdf: np.ndarray
    total_mass: float
    lower: PchipInterpolator
    upper: PchipInterpolator

    def quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        a = self.alpha
        h = 1 - a / 2
        out = np.empty_like(u)
        lo = u <= 0.5
        q = np.where(lo, u, 1.0 - u)
        c_head = self.k0 * 2.0 ** (-a / 2) / h
        head = lo & (q < self.cdf[0])
        mid_lo = lo & ~head
        tail = ~lo & (q < self.ccdf[-1])
        mid_hi = ~lo & ~tail
        out[head] = 1.0 + (q[head] / c_head) ** (1 / h)
        out[mid_lo] = 1.0 + np.exp(self.lower(np.log(q[mid_lo])))
        out[mid_hi] = np.exp(self.upper(np.log(q[mid_hi])))
        out[tail] = (a * q[tail] / self.k0) ** (-1 / a)
        return out


def _exit_density(k0: float, a: float, t: np.ndarray) -> np.ndarray:
    rho = 1.0 + t
    return k0 / rho * (t * (2.0 + t)) ** (-a / 2)


@functools.lru_cache(maxsize=None)
def exit_table(alpha: float, dim: int) -> ExitTable:
    model = StableModel(alpha, dim)
    a = model.alpha
    k0 = sphere_area(dim) * model.poisson_const
    t = np.geomspace(1e-14, 1e14, TABLE_NODES)
    # per-interval masses in the log variable, 8-point Gauss rule on each
    gx, gw = np.polynomial.legendre.leggauss(8)
    lt = np.log(t)
    mid = 0.5 * (lt[1:] + lt[:-1])
    half = 0.5 * (lt[1:] - lt[:-1])
    x = mid[:, None] + half[:, None] * gx[None, :]
    et = np.exp(x)
    pieces = np.sum(_exit_density(k0, a, et) * et * gw[None, :], axis=1) * half
    h = 1 - a / 2
    head = k0 * 2.0 ** (-a / 2) * t[0] ** h / h
    rmax = 1.0 + t[-1]
    tail = k0 * rmax ** (-a) / a
    cdf = head + np.concatenate([[0.0], np.cumsum(pieces)])
    ccdf = tail + np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    total = float(cdf[-1] + tail)
    if abs(total - 1.0) > 1e-8:
        raise ArithmeticError(f"exit law table has total mass {total!r}")
    # each half only where its cumulative values are far from saturating
    lo = cdf <= 0.75
    hi = ccdf <= 0.75
    lower = PchipInterpolator(np.log(cdf[lo]), np.log(t[lo]))
    upper = PchipInterpolator(np.log(ccdf[hi][::-1]), np.log(1.0 + t[hi][::-1]))
    return ExitTable(a, k0, t, cdf, ccdf, total, lower, upper)


def _directions(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_exit_ball(rng: np.random.Generator, model: StableModel, r: float, size: int | None = None):
    """Exit position relative to the center of B(0, r) for the process started at the center."""
    if not r > 0:
        raise ValueError("radius must be positive")
    tab = exit_table(model.alpha, model.dim)
    n = 1 if size is None else int(size)
    rho = tab.quantile(rng.random(n))
    pts = r * rho[:, None] * _directions(rng, n, model.dim)
    return pts[0] if size is None else pts


# ---------------------------------------------------------------------------
# walk on spheres


def _center_green_const(model: StableModel) -> float:
    """G_{B(0,1)} 1 at the center; G_{B(0,r)} 1(0) scales like r^alpha."""
    return exit_time_exact(model, Ball.unit(model.dim), 1.0)


@functools.lru_cache(maxsize=None)
def _center_green_rule(alpha: float, dim: int):
    """Cubature nodes y_k in the unit ball and weights with sum w_k phi(y_k) ~ int G_B1(0, y) phi(y) dy."""
    from .ball_kernels import green_from_geometry

    model = StableModel(alpha, dim)
    br = graded_breaks(0.0, 1.0, left=True, right=True, bulk=2, depth=6)
    s, ws, _ = gk_panels(br)
    g = green_from_geometry(model, 1.0, 1.0, (1 - s) * (1 + s), s)
    rad_w = ws * s ** (dim - 1) * g
    if dim == 3:
        c, wc = np.polynomial.legendre.leggauss(6)
        phi = 2 * math.pi * (np.arange(8) + 0.5) / 8
        st = np.sqrt(1 - c * c)
        dirs = np.stack([np.repeat(st, 8) * np.tile(np.cos(phi), 6),
                         np.repeat(st, 8) * np.tile(np.sin(phi), 6),
                         np.repeat(c, 8)], axis=1)
        ang_w = np.repeat(wc, 8) * (2 * math.pi / 8)
    else:
        phi = 2 * math.pi * (np.arange(16) + 0.5) / 16
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        ang_w = np.full(16, 2 * math.pi / 16)
    pts = (s[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
    w = (rad_w[:, None] * ang_w[None, :]).ravel()
    return pts, w


def _constant_value(f: ScalarField):
    if f.is_radial and f.delta_power == 0.0:
        return float(np.asarray(f.radial(np.asarray(1.0))))
    if f.is_radial and f.meta == "zero":
        return 0.0
    return None


def _walk(model: StableModel, ball: Ball, x, cfg: WoSConfig, rng: np.random.Generator, n: int,
          exit_score, step_score):
    d = model.dim
    tab = exit_table(model.alpha, d)
    c = ball.center_array
    R = ball.radius
    pos = np.tile(np.asarray(x, dtype=float), (n, 1))
    total = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    for _ in range(cfg.max_steps):
        if active.size == 0:
            break
        p = pos[active]
        r = R - np.linalg.norm(p - c, axis=1)
        if step_score is not None:
            total[active] += step_score(p, r)
        rho = tab.quantile(rng.random(active.size))
        y = p + (r * rho)[:, None] * _directions(rng, active.size, d)
        steps[active] += 1
        dist = np.linalg.norm(y - c, axis=1)
        out = dist >= R
        if exit_score is not None and np.any(out):
            total[active[out]] += exit_score(dist[out] - R)
        pos[active] = y
        active = active[~out]
    return total, steps, active.size


def _run(model: StableModel, ball: Ball, x, cfg: WoSConfig, exit_score, step_score) -> MCEstimate:
    if float(ball.delta(np.asarray(x, dtype=float))) <= 0:
        raise ValueError("x must lie strictly inside the ball")
    n_total = int(cfg.samples)
    n_chunks = -(-n_total // CHUNK)
    seeds = np.random.SeedSequence(int(cfg.seed)).spawn(n_chunks)
    values, all_steps, truncated = [], [], 0
    for i, ss in enumerate(seeds):
        n = min(CHUNK, n_total - i * CHUNK)
        rng = np.random.Generator(np.random.PCG64(ss))
        vals, steps, left = _walk(model, ball, x, cfg, rng, n, exit_score, step_score)
        values.append(vals)
        all_steps.append(steps)
        truncated += left
    v = np.concatenate(values)
    frac = truncated / n_total
    if frac > FAIL_TRUNCATION:
        raise MCBiasError(f"{frac:.3g} of the paths hit the step cap")
    if frac > WARN_TRUNCATION:
        warnings.warn(f"{frac:.3g} of the paths hit the step cap; the estimate is biased", stacklevel=3)
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    z = float(norm.ppf(0.5 + cfg.confidence / 2))
    return MCEstimate(mean, se, frac, v.size, (mean - z * se, mean + z * se),
                      float(np.median(np.concatenate(all_steps))))


def wos_poisson(model: StableModel, ball: Ball, g: ExteriorDensity, x, config: WoSConfig | None = None) -> MCEstimate:
    """Estimate P_D g(x) by scoring g at the first landing point outside the ball."""
    cfg = config or WoSConfig()
    if g.support_end == 0.0:
        return _run(model, ball, x, cfg, None, None)

    def score(t):
        return np.asarray(g.profile(t), dtype=float)

    return _run(model, ball, x, cfg, score, None)


def wos_green(model: StableModel, ball: Ball, f: ScalarField, x, config: WoSConfig | None = None) -> MCEstimate:
    """Estimate G_D f(x) by summing G_{B(x_i, r_i)} f(x_i) along the walk.

    Constant f uses the closed form kappa r^alpha at the center; other fields
    use a fixed cubature against the center Green function of the unit ball.
    """
    cfg = config or WoSConfig()
    const = _constant_value(f)
    kappa = _center_green_const(model)
    if const is not None:
        if const == 0.0:
            return _run(model, ball, x, cfg, None, None)
        unit = kappa * const

        def step(p, r):
            return r**model.alpha * unit
    else:
        nodes, weights = _center_green_rule(model.alpha, model.dim)

        def step(p, r):
            out = np.empty(p.shape[0])
            for i in range(p.shape[0]):
                q = p[i] + r[i] * nodes
                out[i] = r[i] ** model.alpha * float(np.dot(weights, f(q, ball)))
            return out

    return _run(model, ball, x, cfg, None, step)

"""Weak dual solutions of the semilinear Dirichlet problem on a ball.

The problem is  -L u = m f(x, u)  in the ball, u = lambda outside, with
boundary trace mu = h sigma.  All data here are radial, so every field is a
function of the distance to the boundary and lives on a one-dimensional grid
graded toward the sphere.  Two schemes are provided: the monotone iteration
for nonnegative nondecreasing nonlinearities, bracketed by an explicit
supersolution, and a truncated Picard iteration for general signs.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ball_kernels import check_model_ball, green_from_geometry
from .estimates import (
    PreconditionError,
    ProfileSpec,
    check_U_conditions,
    decade_exponent,
    integral_finite_near_zero,
    loglog_slope,
)
from .levy import DomainError, StableModel, sphere_area
from .potentials import (
    BoundaryDensity,
    ExteriorDensity,
    RadialGreenOperator,
    ScalarField,
    green_potential_radial,
    martin_potential,
    martin_sigma_exact,
    poisson_potential,
    radial_grid,
    sphere_green,
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
    "SIGNS",
    "CRITERIA",
    "ProblemSpec",
    "IterationTrace",
    "CriterionReport",
    "DivergenceEvidence",
    "Bump",
    "SolverError",
    "NonConvergenceError",
    "SupersolutionBreachError",
    "ContractionError",
    "integral_criterion",
    "supersolution_fit",
    "monotone_solve",
    "picard_solve",
    "verify_weak_dual",
    "nonexistence_diagnostic",
    "domain_decomposition_check",
    "data_potential",
]

SIGNS = ("nonnegative-f", "nonpositive-f", "general")

# Criterion names and what they decide:
#   boundary_decay       lim_{t->0} W(t) V(t)^2 = 0
#   integral             int_0 W V Lambda(V/t) dt < inf
#   exterior_finite      int_0^1 U~/V + int_1^inf U~/(V^2 t) < inf
#   exterior_dominated   int_0^diam U~(t)/(V(t)(s+t)) dt <~ U~(s)/V(s)
#   green_dominated      both Green-side bounds for W Lambda(U~) against U~
#   U_interior           W Lambda(V/t) satisfies conditions (U)
#   U_exterior           W Lambda(U~) satisfies conditions (U)
CRITERIA = ("boundary_decay", "integral", "exterior_finite", "exterior_dominated", "green_dominated",
            "U_interior", "U_exterior")


class SolverError(RuntimeError):
    """Iteration failure; carries the trace recorded so far."""

    def __init__(self, message: str, trace: "IterationTrace | None" = None):
        super().__init__(message)
        self.trace = trace


class NonConvergenceError(SolverError):
    pass


class SupersolutionBreachError(SolverError):
    pass


class ContractionError(SolverError):
    pass


# ---------------------------------------------------------------------------
# problem description


def _zero(t):
    return np.zeros(np.shape(t))


def _one(t):
    return np.ones(np.shape(t))


@dataclass(frozen=True)
class ProblemSpec:
    """Data of the semilinear problem.

    ``f(delta, t)`` defaults to ``s W(delta) Lambda(t)`` with the sign rule:
    nonnegative-f uses ``W Lambda(t+)``, nonpositive-f uses ``-W Lambda(t+)``
    and general uses the odd absorption ``-W sgn(t) Lambda(|t|)``.  A custom
    ``nonlinearity`` overrides this but must still obey |f| <= W Lambda(|t|).
    """

    sign: str = "nonnegative-f"
    W: Callable = _one
    Lambda: Callable = _zero
    p: float | None = None
    W_beta: float | None = 0.0
    doubling: float = 1.0
    exterior: ExteriorDensity | None = None
    boundary: BoundaryDensity | None = None
    m: float = 1.0
    nonlinearity: Callable | None = None
    meta: str = ""

    def __post_init__(self) -> None:
        if self.sign not in SIGNS:
            raise ValueError(f"sign must be one of {SIGNS}")
        if not (self.m >= 0) or not math.isfinite(self.m):
            raise ValueError("coupling m must be a finite nonnegative number")
        if self.boundary is not None and self.boundary.constant is None:
            raise ValueError("the radial solver needs a constant boundary density")

    @classmethod
    def powers(cls, *, beta1: float = 0.0, p: float | None = None, beta2: float | None = None,
               h: float | None = None, m: float = 1.0, sign: str = "nonnegative-f") -> "ProblemSpec":
        """W = t^-beta1, Lambda = t^p (zero when p is None), U~ = t^-beta2, mu = h sigma."""
        W = _one if beta1 == 0 else functools.partial(_power, -beta1)
        Lam = _zero if p is None else functools.partial(_power, p)
        return cls(sign=sign, W=W, Lambda=Lam, p=p, W_beta=float(beta1),
                   doubling=2.0**p if p is not None else 1.0,
                   exterior=ExteriorDensity.power(beta2) if beta2 is not None else None,
                   boundary=BoundaryDensity.const(h) if h is not None else None, m=m,
                   meta=f"beta1={beta1},p={p},beta2={beta2},h={h}")

    @classmethod
    def from_json(cls, doc: dict) -> tuple[StableModel, Ball, "ProblemSpec"]:
        model = StableModel(float(doc["alpha"]), int(doc["dim"]))
        ball = Ball.unit(model.dim, float(doc.get("radius", 1.0)))
        W = doc.get("W") or {"type": "power", "beta": 0.0}
        L = doc.get("Lambda") or {"type": "zero"}
        ext = doc.get("exterior")
        bnd = doc.get("boundary")
        spec = cls.powers(beta1=float(W.get("beta", 0.0)),
                          p=float(L["p"]) if L.get("type") == "power" else None,
                          beta2=float(ext["beta2"]) if ext else None,
                          h=float(bnd["h"]) if bnd else None,
                          m=float(doc.get("m", 1.0)), sign=doc.get("sign", "nonnegative-f"))
        return model, ball, spec

    @property
    def lambda_is_zero(self) -> bool:
        return self.Lambda is _zero

    @property
    def has_boundary(self) -> bool:
        return self.boundary is not None and self.boundary.constant != 0.0

    @property
    def has_exterior(self) -> bool:
        return self.exterior is not None and self.exterior.support_end != 0.0

    def f(self, delta, t):
        """Nonlinearity without the coupling m."""
        delta = np.asarray(delta, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.nonlinearity is not None:
            return np.asarray(self.nonlinearity(delta, t), dtype=float) * np.ones(np.broadcast(delta, t).shape)
        w = self.W(delta)
        if self.sign == "nonnegative-f":
            return w * self.Lambda(np.maximum(t, 0.0))
        if self.sign == "nonpositive-f":
            return -w * self.Lambda(np.maximum(t, 0.0))
        return -w * np.sign(t) * self.Lambda(np.abs(t))

    def with_m(self, m: float) -> "ProblemSpec":
        from dataclasses import replace
        return replace(self, m=float(m))


def _power(e, t):
    return np.asarray(t, dtype=float) ** e


@dataclass
class IterationTrace:
    iterates: list = field(default_factory=list)
    sup_norm_diffs: list = field(default_factory=list)
    monotone_flag: bool = True
    dominated_flag: bool = True
    converged: bool = False
    k_final: int = 0

    def rows(self):
        return [(k + 1, d, self.monotone_flag, self.dominated_flag) for k, d in enumerate(self.sup_norm_diffs)]


@dataclass(frozen=True)
class CriterionReport:
    which: str
    finite: bool
    exponent_margin: float | None = None
    method: str = "exponent"
    detail: str = ""


@dataclass(frozen=True)
class DivergenceEvidence:
    eps: tuple
    partial_integrals: tuple
    growth_exponent: float
    divergent: bool
    kind: str


# ---------------------------------------------------------------------------
# criteria


def _is_power(problem: ProblemSpec) -> bool:
    return problem.W_beta is not None and (problem.p is not None or problem.lambda_is_zero)


def _beta2(problem: ProblemSpec):
    return problem.exterior.beta if problem.exterior is not None else None


def _exponent_decision(model: StableModel, problem: ProblemSpec, which: str) -> CriterionReport:
    a = model.alpha
    a2 = a / 2
    b1 = problem.W_beta
    p = problem.p if problem.p is not None else 0.0
    lam0 = problem.lambda_is_zero
    b2 = _beta2(problem)
    if which == "boundary_decay":
        return CriterionReport(which, b1 < a, a - b1)
    if which == "integral":
        if lam0:
            return CriterionReport(which, True, math.inf, detail="Lambda is zero")
        margin = 1 + a2 - b1 - p * (1 - a2)
        return CriterionReport(which, margin > 0, margin)
    if which == "U_interior":
        if lam0:
            return CriterionReport(which, True, math.inf, detail="Lambda is zero")
        beta = b1 + p * (1 - a2)
        return CriterionReport(which, 0 <= beta < 1 + a2, 1 + a2 - beta, detail=f"profile exponent {beta:g}")
    if b2 is None:
        raise ValueError(f"criterion {which!r} needs a power exterior density")
    if which == "exterior_finite":
        margin = min(b2 + a, 1 - a2 - b2)
        return CriterionReport(which, margin > 0, margin)
    if which == "exterior_dominated":
        margin = min(b2 + a2, 1 - a2 - b2)
        return CriterionReport(which, margin > 0, margin)
    if which == "U_exterior":
        if lam0:
            return CriterionReport(which, True, math.inf, detail="Lambda is zero")
        beta = b1 + p * b2
        return CriterionReport(which, 0 <= beta < 1 + a2, 1 + a2 - beta, detail=f"profile exponent {beta:g}")
    if which == "green_dominated":
        if lam0:
            return CriterionReport(which, True, math.inf, detail="Lambda is zero")
        e = -b1 + a2 - p * b2
        key = a - b1 - b2 * (p - 1)
        low = e > -1 and key >= 0
        if e < 0:
            high = key >= 0
        elif e == 0:
            high = b2 > -a2
        else:
            high = b2 >= -a2
        return CriterionReport(which, bool(low and high), key, detail=f"integrand exponent {e:g}")
    raise ValueError(f"unknown criterion {which!r}; expected one of {CRITERIA}")


def _ratio_bounded(lhs, rhs, s_grid) -> bool:
    vals = np.array([lhs(s) / rhs(s) for s in s_grid])
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        return False
    return loglog_slope(s_grid, vals) > -0.02


def _quadrature_decision(model: StableModel, problem: ProblemSpec, which: str, diam: float) -> CriterionReport:
    a2 = model.half
    W, Lam = problem.W, problem.Lambda
    V = lambda t: np.asarray(t, dtype=float) ** a2  # noqa: E731
    Ut = problem.exterior.profile if problem.exterior is not None else None
    q = "quadrature"
    if which == "boundary_decay":
        t = np.geomspace(1e-12, 1e-6, 7)
        vals = W(t) * V(t) ** 2
        ok = bool(np.all(np.isfinite(vals))) and (np.all(vals == 0) or loglog_slope(t, vals) > 5e-3)
        return CriterionReport(which, ok, method=q)
    if which == "integral":
        e1 = decade_exponent(lambda t: W(t) * V(t) * Lam(V(t) / t))
        return CriterionReport(which, e1 > 5e-3, e1, method=q)
    if which in ("U_interior", "U_exterior"):
        if which == "U_interior":
            rule = lambda t: W(t) * Lam(V(t) / t)  # noqa: E731
        else:
            if Ut is None:
                raise ValueError(f"criterion {which!r} needs an exterior density")
            rule = lambda t: W(t) * Lam(Ut(t))  # noqa: E731
        flags = check_U_conditions(model, ProfileSpec(rule=rule), diam)
        return CriterionReport(which, flags.all, method=q, detail=str(flags))
    if Ut is None:
        raise ValueError(f"criterion {which!r} needs an exterior density")
    if which == "exterior_finite":
        near = integral_finite_near_zero(lambda t: Ut(t) / V(t))
        tail = integral_finite_near_zero(lambda s: Ut(1 / s) * s ** (model.alpha - 1))
        return CriterionReport(which, near and tail, method=q)
    s_grid = np.geomspace(1e-13, 1e-10, 7)
    if which == "exterior_dominated":
        if not integral_finite_near_zero(lambda t: Ut(t) / V(t)):
            return CriterionReport(which, False, method=q, detail="left side infinite")

        near = lambda t: Ut(t) / V(t)  # noqa: E731
        e_near = decade_exponent(near)

        def lhs(s):
            # below s e^-40 the factor 1 / (s + t) is 1 / s up to e^-40
            t0 = s * math.exp(-40.0)
            head = integrate_from_zero(near, t0, e_near) / s

            def body(x):
                t = np.exp(x)
                return Ut(t) * t / (V(t) * (s + t))

            return head + integrate_interval(body, math.log(t0), math.log(diam), interior=(math.log(s),),
                                             tol=1e-8).value

        return CriterionReport(which, _ratio_bounded(lhs, lambda s: Ut(s) / V(s), s_grid), method=q)
    if which == "green_dominated":
        g = lambda t: W(t) * V(t) * Lam(Ut(t))  # noqa: E731
        if not integral_finite_near_zero(g):
            return CriterionReport(which, False, method=q, detail="left side infinite")
        e_g = decade_exponent(g)
        low = _ratio_bounded(
            lambda s: integrate_from_zero(g, s, e_g),
            lambda s: s * Ut(s) / V(s), s_grid)
        high = _ratio_bounded(
            lambda s: integrate_interval(lambda t: g(t) / t, s, diam, left=True, tol=1e-8).value,
            lambda s: Ut(s) / V(s), s_grid)
        return CriterionReport(which, low and high, method=q)
    raise ValueError(f"unknown criterion {which!r}; expected one of {CRITERIA}")


def integral_criterion(model: StableModel, problem: ProblemSpec, which: str, *, method: str = "auto",
                       diam: float = 2.0) -> CriterionReport:
    """Finite/infinite decision for one of ``CRITERIA``.

    Power families are decided by exponent arithmetic; other profiles, or
    ``method="quadrature"``, by per-decade quadrature on [1e-8, 1].
    """
    if which not in CRITERIA:
        raise ValueError(f"unknown criterion {which!r}; expected one of {CRITERIA}")
    power = _is_power(problem) and (which in ("boundary_decay", "integral", "U_interior")
                                    or (problem.exterior is not None and problem.exterior.beta is not None))
    if method == "exponent" or (method == "auto" and power):
        if not power:
            raise ValueError("exponent arithmetic needs power-law data")
        return _exponent_decision(model, problem, which)
    if problem.lambda_is_zero and which in ("integral", "U_interior", "U_exterior", "green_dominated"):
        return CriterionReport(which, True, math.inf, method="quadrature", detail="Lambda is zero")
    return _quadrature_decision(model, problem, which, diam)


def nonexistence_diagnostic(model: StableModel, ball: Ball, problem: ProblemSpec, z,
                            decades: int = 10) -> DivergenceEvidence:
    """Growth of int_eps^eps0 V W Lambda(V/t) dt as eps shrinks.

    The local exponent e of the integrand is read off the last two decades;
    e + 1 <= 0 means the integral diverges (logarithmically when e + 1 = 0).
    """
    check_model_ball(model, ball)
    zr = np.asarray(z, dtype=float) - ball.center_array
    if abs(np.linalg.norm(zr) - ball.radius) > 1e-9 * ball.radius:
        raise DomainError("z must lie on the boundary sphere")
    if problem.sign != "nonpositive-f" or not problem.has_boundary:
        raise PreconditionError("diagnostic needs a nonpositive nonlinearity and a nonzero boundary measure")
    a2 = model.half
    eps0 = 0.5 * ball.radius
    eps = eps0 * 10.0 ** -np.arange(1, decades + 1)
    if problem.lambda_is_zero:
        return DivergenceEvidence(tuple(eps), tuple(0.0 for _ in eps), math.inf, False, "convergent")

    def integrand(t):
        v = t**a2
        return v * problem.W(t) * problem.Lambda(v / t)

    parts, total = [], 0.0
    hi = eps0
    for lo in eps:
        total += integrate_interval(integrand, lo, hi, tol=1e-10).value
        parts.append(total)
        hi = lo
    e1 = decade_exponent(integrand, decades, upper=eps0)
    if e1 > 5e-3:
        kind, div = "convergent", False
    elif e1 > -5e-3:
        kind, div = "logarithmic", True
    else:
        kind, div = "power", True
    return DivergenceEvidence(tuple(eps), tuple(parts), e1 - 1, div, kind)


# ---------------------------------------------------------------------------
# discretization


@dataclass(frozen=True)
class _VOverT:
    """t -> V(t) / t, the boundary shape of the Martin potential of surface measure."""

    half: float

    def __call__(self, t):
        return np.asarray(t, dtype=float) ** (self.half - 1)


@dataclass(frozen=True)
class _DataShape:
    """Envelope of the boundary behaviour of P_D lambda + M_D mu."""

    half: float
    use_v: bool
    beta2: float | None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        if self.use_v:
            out = out + t ** (self.half - 1)
        if self.beta2 is not None and self.beta2 > 0:
            out = out + t ** (-self.beta2)
        return out


def _data_shape(model: StableModel, problem: ProblemSpec) -> _DataShape:
    use_v = problem.has_boundary
    b2 = None
    if problem.has_exterior:
        b2 = problem.exterior.beta
        if b2 is None:
            use_v = True
    return _DataShape(model.half, use_v, b2)


def data_potential(model: StableModel, ball: Ball, problem: ProblemSpec, deltas, *, absolute: bool = False):
    """P_D lambda + M_D mu at boundary distances ``deltas`` (radial data)."""
    deltas = np.asarray(deltas, dtype=float)
    out = np.zeros_like(deltas)
    R = ball.radius
    e1 = np.eye(model.dim)[0]
    if problem.has_exterior:
        ext = problem.exterior
        if absolute:
            ext = ExteriorDensity(profile=lambda t, pr=ext.profile: np.abs(pr(t)), decay_exponent=ext.decay_exponent,
                                  beta=ext.beta, breaks=ext.breaks, support_end=ext.support_end)
        for i, t in enumerate(deltas):
            out[i] += poisson_potential(model, ball, ext, ball.center_array + (R - t) * e1)
    if problem.has_boundary:
        h = abs(problem.boundary.constant) if absolute else problem.boundary.constant
        for i, t in enumerate(deltas):
            out[i] += h * martin_sigma_exact(model, ball, ball.center_array + (R - t) * e1)
    return out


def _grid(ball: Ball, grid) -> np.ndarray:
    if grid is None:
        return radial_grid(ball)
    if np.isscalar(grid):
        return radial_grid(ball, int(grid))
    return np.asarray(grid, dtype=float)


def _check_weight(model: StableModel, weight) -> None:
    if not integral_finite_near_zero(lambda t: weight(t) * t**model.half):
        raise DivergenceError("Green potential of the nonlinearity envelope is infinite")


@functools.lru_cache(maxsize=16)
def _operator(model: StableModel, ball: Ball, nodes: tuple, weight) -> RadialGreenOperator:
    return RadialGreenOperator(model, ball, np.asarray(nodes), weight)


@dataclass(frozen=True)
class _Weight:
    """Hashable weight W(t) Lambda(c * shape(t)) used as the operator density."""

    problem: ProblemSpec
    shape: Callable
    scale: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.problem.W(t) * self.problem.Lambda(self.scale * self.shape(t))


def _nodal_ratio(fvals, wvals):
    out = np.zeros_like(fvals)
    nz = wvals != 0
    out[nz] = fvals[nz] / wvals[nz]
    return out


# ---------------------------------------------------------------------------
# monotone scheme


@dataclass(frozen=True)
class _Super:
    c1: float
    c2: float
    c4: float
    m1: float
    case: str
    shape: Callable = field(compare=False, repr=False)


def _super_case(model: StableModel, problem: ProblemSpec, case: str) -> str:
    if case != "auto":
        return case
    if problem.has_boundary or not problem.has_exterior:
        return "i"
    if problem.exterior.beta is None:
        return "i"
    return "ii" if _case_ii_ok(model, problem) else "i"


def _case_ii_ok(model, problem) -> bool:
    return all(integral_criterion(model, problem, w).finite
               for w in ("U_exterior", "exterior_dominated", "green_dominated"))


def _fit(model: StableModel, ball: Ball, problem: ProblemSpec, nodes: np.ndarray, case: str) -> _Super:
    if problem.sign != "nonnegative-f":
        raise PreconditionError("the monotone scheme needs a nonnegative nonlinearity")
    case = _super_case(model, problem, case)
    if case == "i":
        if not problem.lambda_is_zero and not integral_criterion(model, problem, "U_interior").finite:
            raise PreconditionError("W Lambda(V/t) does not satisfy conditions (U)")
        shape = _VOverT(model.half)
    elif case == "ii":
        if problem.has_boundary:
            raise PreconditionError("the exterior-shaped supersolution needs a zero boundary measure")
        if not problem.has_exterior or problem.exterior.beta is None or not _case_ii_ok(model, problem):
            raise PreconditionError("exterior-shaped supersolution certificate is absent")
        shape = problem.exterior.profile
    else:
        raise ValueError("case must be 'i', 'ii' or 'auto'")
    s = shape(nodes)
    u0 = data_potential(model, ball, problem, nodes)
    c1 = float(np.max(u0 / s))
    c2 = 2.0 * c1
    if problem.lambda_is_zero or c1 == 0.0:
        return _Super(c1, c2, 0.0, math.inf, case, shape)
    w = _Weight(problem, shape)
    _check_weight(model, w)
    A = _operator(model, ball, tuple(nodes), w)
    gbar = _nodal_ratio(problem.f(nodes, c2 * s), w(nodes))
    c4 = float(np.max(A.apply(gbar) / s))
    m1 = (c2 - c1) / c4 if c4 > 0 else math.inf
    return _Super(c1, c2, c4, m1, case, shape)


def supersolution_fit(model: StableModel, ball: Ball, problem: ProblemSpec, grid=None,
                      case: str = "auto") -> tuple[float, float, float, float]:
    """Empirical constants (c1, c2, c4, m1) of the explicit supersolution.

    c1 bounds u0 / shape on the grid, c2 = 2 c1, c4 bounds the Green
    potential of f at c2 * shape over shape, and any m <= m1 = (c2 - c1) / c4
    keeps c2 * shape a supersolution on the grid.  The shape is V(t)/t for
    case "i" and the exterior profile for case "ii".
    """
    check_model_ball(model, ball)
    fit = _fit(model, ball, problem, _grid(ball, grid), case)
    return fit.c1, fit.c2, fit.c4, fit.m1


def monotone_solve(model: StableModel, ball: Ball, problem: ProblemSpec, grid=None, tol: float = 1e-4,
                   k_max: int = 200, case: str = "auto") -> tuple[ScalarField, IterationTrace]:
    """Iterate u_k = m G_D f(., u_{k-1}) + u0 from u0 = P_D lambda + M_D mu.

    Differences are measured in the sup norm of (u_k - u_{k-1}) / shape on
    the grid, relative to sup u0 / shape.  Monotonicity and domination by the
    fitted supersolution are checked at every step.
    """
    check_model_ball(model, ball)
    if problem.nonlinearity is None and problem.sign != "nonnegative-f":
        raise PreconditionError("the monotone scheme needs a nonnegative nondecreasing nonlinearity")
    nodes = _grid(ball, grid)
    fit = _fit(model, ball, problem, nodes, case)
    s = fit.shape(nodes)
    u0 = data_potential(model, ball, problem, nodes)
    trace = IterationTrace(iterates=[u0.copy()])
    ubar = fit.c2 * s
    scale = max(float(np.max(np.abs(u0) / s)), 1e-300)
    if problem.m > fit.m1 * (1 + 1e-12):
        raise SupersolutionBreachError(f"m = {problem.m:g} exceeds the fitted bound m1 = {fit.m1:g}", trace)
    if problem.lambda_is_zero or problem.m == 0.0:
        trace.sup_norm_diffs.append(0.0)
        trace.iterates.append(u0.copy())
        trace.converged, trace.k_final = True, 1
        return ScalarField.from_nodes(nodes, u0, fit.shape, meta="monotone solution"), trace
    w = _Weight(problem, fit.shape)
    A = _operator(model, ball, tuple(nodes), w)
    wn = w(nodes)
    slack = 1e-12 * scale
    u = u0
    for k in range(1, k_max + 1):
        new = problem.m * A.apply(_nodal_ratio(problem.f(nodes, u), wn)) + u0
        diff = float(np.max(np.abs(new - u) / s))
        if np.any((new - u) / s < -slack):
            trace.monotone_flag = False
        if np.any((new - ubar) / s > slack):
            trace.dominated_flag = False
        trace.iterates.append(new.copy())
        trace.sup_norm_diffs.append(diff)
        u = new
        trace.k_final = k
        if not trace.dominated_flag:
            raise SupersolutionBreachError("iterate exceeded the supersolution; m is too large", trace)
        if diff <= tol * scale:
            trace.converged = True
            return ScalarField.from_nodes(nodes, u, fit.shape, meta="monotone solution"), trace
    raise NonConvergenceError(f"no convergence within {k_max} iterations", trace)


# ---------------------------------------------------------------------------
# truncated Picard scheme


def _smallest_c(m: float, Lam, r1: float, r2: float) -> float:
    """Smallest C > 0 with m (Lambda(2C) r1 + r2) <= C, or inf if none."""

    def ok(c):
        return m * (float(Lam(np.asarray(2 * c))) * r1 + r2) <= c

    grid = np.geomspace(1e-12, 1e12, 241)
    hits = [c for c in grid if ok(c)]
    if not hits:
        return math.inf
    hi = hits[0]
    lo = hi / 1.259 if hi > grid[0] else 0.0
    if lo > 0 and ok(lo):
        return lo
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid > 0 and ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def picard_solve(model: StableModel, ball: Ball, problem: ProblemSpec, grid=None, tol: float = 1e-6,
                 k_max: int = 500, v0=0.0) -> tuple[ScalarField, IterationTrace]:
    """Fixed point of v -> G_D(m F(., v)) with the two-sided truncation F.

    F(y, t) = f(y, clip(t + g(y), -ubar(y), ubar(y))) with ubar = C + gbar,
    g = P_D lambda + M_D mu and gbar its absolute counterpart.  C is the
    smallest constant with m (Lambda(2C) r1 + r2) <= C, r1 = sup G_D W and
    r2 = sup G_D(W Lambda(2 gbar)).  For the nonpositive sign the truncation
    is at ubar = g instead, and C is m sup G_D(W Lambda(g)).  Returns u = v + g.
    """
    check_model_ball(model, ball)
    nodes = _grid(ball, grid)
    shape = _data_shape(model, problem)
    g = data_potential(model, ball, problem, nodes)
    gbar = data_potential(model, ball, problem, nodes, absolute=True)
    trace = IterationTrace()
    if problem.lambda_is_zero and problem.nonlinearity is None or problem.m == 0.0:
        trace.iterates.append(np.zeros_like(nodes))
        trace.sup_norm_diffs.append(0.0)
        trace.converged, trace.k_final = True, 1
        return ScalarField.from_nodes(nodes, g, shape, meta="picard solution"), trace
    if problem.nonlinearity is not None and problem.lambda_is_zero:
        raise PreconditionError("a custom nonlinearity needs its envelope Lambda")
    w = _Weight(problem, shape, 2.0)
    _check_weight(model, w)
    _check_weight(model, problem.W)
    A = _operator(model, ball, tuple(nodes), w)
    wn = w(nodes)
    if problem.sign == "nonpositive-f" and problem.nonlinearity is None:
        # f <= 0 makes u0 = g a supersolution, so truncating at g suffices
        ubar = gbar
        C = problem.m * float(np.max(A.apply(_nodal_ratio(problem.W(nodes) * problem.Lambda(gbar), wn))))
        C = max(C, 1e-300)
    else:
        r1 = max(green_potential_radial(model, ball, ScalarField.from_delta_profile(problem.W), float(t))
                 for t in nodes)
        r2 = float(np.max(A.apply(_nodal_ratio(problem.W(nodes) * problem.Lambda(2 * gbar), wn))))
        C = _smallest_c(problem.m, problem.Lambda, r1, r2)
        if not math.isfinite(C):
            raise ContractionError("no admissible bound C exists; m is too large", trace)
        ubar = C + gbar
    m = problem.m

    def F(v):
        return problem.f(nodes, np.clip(v + g, -ubar, ubar))

    v = np.full_like(nodes, float(v0)) if np.isscalar(v0) else np.asarray(v0, dtype=float).copy()
    trace.iterates.append(v.copy())
    scale = max(C, 1e-300)
    for k in range(1, k_max + 1):
        new = m * A.apply(_nodal_ratio(F(v), wn))
        diff = float(np.max(np.abs(new - v)))
        trace.iterates.append(new.copy())
        trace.sup_norm_diffs.append(diff)
        trace.k_final = k
        v = new
        if float(np.max(np.abs(v))) > C * (1 + 1e-9):
            trace.dominated_flag = False
            raise ContractionError("iterate left the invariant ball |v| <= C", trace)
        if diff <= tol * scale:
            trace.converged = True
            field_ = ScalarField.from_nodes(nodes, v + g, shape, meta="picard solution")
            field_._cache["bound"] = C
            return field_, trace
    raise NonConvergenceError(f"no convergence within {k_max} iterations", trace)


# ---------------------------------------------------------------------------
# weak dual identity


@dataclass(frozen=True)
class Bump:
    """Smooth bump exp(1 - 1 / (1 - s^2)), s = |y - center| / radius."""

    center: tuple
    radius: float

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        s2 = np.sum((pts - np.asarray(self.center)) ** 2, axis=-1) / self.radius**2
        out = np.zeros(s2.shape)
        inside = s2 < 1
        out[inside] = np.exp(1 - 1 / (1 - s2[inside]))
        return out

    def delta_range(self, ball: Ball) -> tuple[float, float]:
        c = float(np.linalg.norm(np.asarray(self.center) - ball.center_array))
        lo = ball.radius - c - self.radius
        hi = min(ball.radius - max(c - self.radius, 0.0), ball.radius)
        if lo <= 0:
            raise DomainError("bump support must stay inside the ball")
        return lo, hi

    def spherical_mean(self, ball: Ball, deltas) -> np.ndarray:
        """Integral of the bump over the sphere |y| = R - delta (unit-sphere measure)."""
        d = ball.dim
        rho = ball.radius - np.asarray(deltas, dtype=float)
        c = np.asarray(self.center, dtype=float) - ball.center_array
        cn = float(np.linalg.norm(c))
        if cn == 0.0:
            s2 = (rho / self.radius) ** 2
            out = np.where(s2 < 1, np.exp(1 - 1 / np.maximum(1 - s2, 1e-300)), 0.0)
            return sphere_area(d) * out
        th, wk, _ = gk_panels(np.linspace(0.0, math.pi, 33))
        cos = np.cos(th)
        dist2 = rho[:, None] ** 2 + cn * cn - 2 * rho[:, None] * cn * cos[None, :]
        s2 = dist2 / self.radius**2
        vals = np.where(s2 < 1, np.exp(1 - 1 / np.maximum(1 - s2, 1e-300)), 0.0)
        ang = 2 * math.pi * np.sin(th) if d == 3 else 2.0 * np.ones_like(th)
        return np.sum(vals * (ang * wk)[None, :], axis=1)


def _bump_rule(ball: Ball, bump: Bump, n: int = 48):
    lo, hi = bump.delta_range(ball)
    t, wk, _ = gk_panels(np.linspace(lo, hi, n + 1))
    rho = ball.radius - t
    return t, wk * rho ** (ball.dim - 1) * bump.spherical_mean(ball, t)


def _green_of_bump(model: StableModel, ball: Ball, bump: Bump, dy) -> np.ndarray:
    """Spherical integral of G_D psi over |y| = R - dy (unit-sphere measure)."""
    R = ball.radius
    lo, hi = bump.delta_range(ball)
    out = np.empty(np.size(dy))
    base = np.linspace(lo, hi, 25)
    for i, t in enumerate(np.atleast_1d(dy)):
        if lo < t < hi:
            br = graded_breaks(lo, hi, interior=(float(t),), plain=base, bulk=1, depth=30)
        else:
            br = base
        z, wk, _ = gk_panels(br)
        mean = bump.spherical_mean(ball, z)
        out[i] = pairwise_sum(wk * (R - z) ** (ball.dim - 1) * mean * sphere_green(model, R, float(t), z))
    return out


def _green_of_bump_interp(model: StableModel, ball: Ball, bump: Bump, n: int = 40):
    """Interpolant of the spherical integral of G_D psi.

    G_D psi divided by (R^2 - |y|^2)^(alpha/2) is smooth up to the sphere for
    smooth psi, so it is sampled at Chebyshev nodes in the boundary distance
    and interpolated; a check at interleaved points is returned as well.
    """
    R = ball.radius
    k = np.arange(n)
    nodes = 0.5 * R * (1 - np.cos((2 * k + 1) * math.pi / (2 * n)))
    q = _green_of_bump(model, ball, bump, nodes) / (nodes * (2 * R - nodes)) ** model.half
    cheb = np.polynomial.Chebyshev.fit(nodes, q, n - 1, domain=[0.0, R])
    mids = 0.5 * R * (1 - np.cos(np.array([3.0, 21.0, 41.0, 61.0]) * math.pi / (2 * n)))
    check = _green_of_bump(model, ball, bump, mids) / (mids * (2 * R - mids)) ** model.half
    err = float(np.max(np.abs(cheb(mids) - check)) / np.max(np.abs(q)))

    def psi_hat(t):
        t = np.asarray(t, dtype=float)
        return (t * (2 * R - t)) ** model.half * cheb(t)

    return psi_hat, err


def verify_weak_dual(model: StableModel, ball: Ball, u: ScalarField, problem: ProblemSpec,
                     test_set: Sequence[Bump]) -> list[float]:
    """Relative residuals of the weak dual identity against bump test functions.

    For each bump psi the four integrals int u psi, int f_u G_D psi,
    int P_D lambda psi and int M_D mu psi are computed by quadrature, with
    G_D psi obtained directly from the Green function (its spherical means).
    """
    check_model_ball(model, ball)
    R = ball.radius
    d = model.dim
    e1 = np.eye(d)[0]
    out = []
    for bump in test_set:
        t, w = _bump_rule(ball, bump)
        u_vals = u.radial(t)
        i_u = pairwise_sum(w * u_vals)
        i_p = 0.0
        if problem.has_exterior:
            vals = np.array([poisson_potential(model, ball, problem.exterior, ball.center_array + (R - s) * e1)
                             for s in t])
            i_p = pairwise_sum(w * vals)
        i_m = 0.0
        if problem.has_boundary:
            vals = np.array([martin_potential(model, ball, problem.boundary, ball.center_array + (R - s) * e1,
                                              tol=1e-9) for s in t])
            i_m = pairwise_sum(w * vals)
        i_f = 0.0
        if problem.m != 0.0 and not (problem.lambda_is_zero and problem.nonlinearity is None):
            psi_hat, _ = _green_of_bump_interp(model, ball, bump)
            nodes = u._cache.get("nodes", (np.array([]), None))[0]
            kinks = tuple(float(x) for x in nodes if x > 1e-3 * R)
            br = graded_breaks(0.0, R, left=True, plain=kinks, bulk=8, depth=40)
            x, wk, _ = gk_panels(br)
            vals = (R - x) ** (d - 1) * problem.f(x, u.radial(x)) * psi_hat(x)
            i_f = problem.m * pairwise_sum(wk * vals)
        vol = float(np.sum(w)) / max(float(np.max(bump.spherical_mean(ball, t))), 1e-300)
        floor = 1e-12 * float(np.max(np.abs(u_vals))) * vol
        out.append(abs(i_u - i_f - i_p - i_m) / (abs(i_u) + floor + 1e-300))
    return out


# ---------------------------------------------------------------------------
# domain decomposition identity


def domain_decomposition_check(model: StableModel, ball: Ball, u: ScalarField, problem: ProblemSpec,
                               sub_radius: float, points: Sequence[float] | None = None) -> float:
    """Max relative residual of u = G_A f_u + P_A(u 1_D) + P_A lambda on A = B(0, sub_radius).

    ``points`` are distances to the boundary of A (default: the center and
    two off-center points).  The exterior data seen from A is u on the shell
    between the spheres followed by lambda outside the ball.
    """
    check_model_ball(model, ball)
    R = ball.radius
    if not 0 < sub_radius < R:
        raise ValueError("sub_radius must lie in (0, R)")
    A = Ball(ball.center, sub_radius)
    gap = R - sub_radius
    ext = problem.exterior if problem.has_exterior else None

    def outer_profile(t):
        t = np.asarray(t, dtype=float)
        inner = t < gap
        out = np.zeros_like(t)
        if np.any(inner):
            out[inner] = u.radial(gap - t[inner])
        if ext is not None and np.any(~inner):
            out[~inner] = ext.profile(t[~inner] - gap)
        return out

    nodes = u._cache.get("nodes", (np.array([]), None))[0]
    kinks = tuple(gap - float(n) for n in nodes if 1e-4 * gap < n < gap)
    breaks = kinks + (gap,) + tuple(gap + b for b in (ext.breaks if ext is not None else ()))
    end = None if ext is not None and ext.support_end is None else (
        gap + (ext.support_end if ext is not None else 0.0))
    data = ExteriorDensity(profile=outer_profile, breaks=breaks, support_end=end)

    def f_a(t):
        dd = np.asarray(t, dtype=float) + gap
        return problem.m * problem.f(dd, u.radial(dd))

    fa = ScalarField.from_delta_profile(f_a)
    pts = points if points is not None else (sub_radius, 0.5 * sub_radius, 0.2 * sub_radius)
    e1 = np.eye(model.dim)[0]
    worst = 0.0
    for t in pts:
        x = A.center_array + (sub_radius - t) * e1
        lhs = float(u.radial(np.asarray(t + gap)))
        rhs = (green_potential_radial(model, A, fa, float(t), tol=1e-8)
               + poisson_potential(model, A, data, x, tol=1e-7))
        scale = max(abs(lhs), abs(rhs))
        res = 0.0 if scale == 0 else abs(lhs - rhs) / scale
        worst = max(worst, res)
    return worst

"""Scaling function, renewal function and Levy density of the isotropic stable process."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gamma

__all__ = [
    "DomainError",
    "ProbeError",
    "StableModel",
    "ScalingProbeResult",
    "phi_eval",
    "renewal_eval",
    "levy_density",
    "weak_scaling_probe",
    "sphere_area",
]


class DomainError(ValueError):
    """Argument outside the domain of a kernel or scaling function."""


class ProbeError(ValueError):
    """Raised when a weak-scaling probe cannot certify exponents in (0, 1)."""


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim."""
    return 2.0 * math.pi ** (dim / 2) / gamma(dim / 2)


@dataclass(frozen=True)
class StableModel:
    """Isotropic alpha-stable process in dimension 2 or 3.

    The characteristic exponent is pinned to ``|xi|^alpha``; all kernel
    constants below follow from that normalization and are cached on
    construction.
    """

    alpha: float
    dim: int
    levy_const: float = field(init=False)
    green_const: float = field(init=False)
    poisson_const: float = field(init=False)

    def __post_init__(self) -> None:
        a, d = float(self.alpha), int(self.dim)
        if not (0.0 < a < 2.0) or not math.isfinite(a):
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha}")
        if d not in (2, 3) or d != self.dim:
            raise DomainError(f"dim must be 2 or 3, got {self.dim}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "dim", d)
        levy = a * 2.0 ** (a - 1) * gamma((d + a) / 2) / (math.pi ** (d / 2) * gamma(1 - a / 2))
        green = gamma(d / 2) / (2.0**a * math.pi ** (d / 2) * gamma(a / 2) ** 2)
        poisson = gamma(d / 2) * math.sin(math.pi * a / 2) / math.pi ** (d / 2 + 1)
        for name, val in (("levy_const", levy), ("green_const", green), ("poisson_const", poisson)):
            if not (math.isfinite(val) and val > 0):
                raise DomainError(f"{name} is not a positive finite number")
            object.__setattr__(self, name, float(val))

    @property
    def half(self) -> float:
        """Exponent of the renewal function, alpha / 2."""
        return self.alpha / 2


@dataclass(frozen=True)
class ScalingProbeResult:
    delta1: float
    delta2: float
    a1: float
    a2: float


def phi_eval(model: StableModel, lam):
    """phi(lambda) = lambda^(alpha/2) for lambda > 0."""
    arr = np.asarray(lam, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("phi is defined for positive arguments only")
    out = arr ** model.half
    return float(out) if out.ndim == 0 else out


def renewal_eval(model: StableModel, t):
    """Renewal function V(t) = t^(alpha/2), with V(0) = 0."""
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError("renewal function is defined for t >= 0")
    out = arr ** model.half
    return float(out) if out.ndim == 0 else out


def levy_density(model: StableModel, r):
    """Jump kernel j(r) = C(d, alpha) r^(-d-alpha)."""
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("Levy density needs r > 0")
    out = model.levy_const * arr ** (-model.dim - model.alpha)
    return float(out) if out.ndim == 0 else out


def weak_scaling_probe(
    phi_samples: Sequence[tuple[float, float]], range_: tuple[float, float]
) -> ScalingProbeResult:
    """Fit lower and upper scaling exponents from sampled values of phi.

    Every pair of samples ``s < t`` inside ``range_`` contributes the slope
    ``log(phi(t)/phi(s)) / log(t/s)``.  The exponents are the extreme slopes
    and the constants are the tightest ones making the two-sided power bound
    hold on every sampled pair, so the result is a certificate on the sample
    set rather than a regression estimate.
    """
    lo, hi = range_
    pts = np.array([(t, v) for t, v in phi_samples if lo <= t <= hi], dtype=float)
    if pts.shape[0] < 8:
        raise ProbeError("need at least 8 samples inside the probe range")
    t, v = pts[:, 0], pts[:, 1]
    if np.any(np.diff(t) <= 0):
        raise ProbeError("sample abscissae must be strictly increasing")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ProbeError("phi samples must be positive and finite")
    if np.any(np.diff(v) < 0):
        raise ProbeError("phi samples are not monotone")
    lt, lv = np.log(t), np.log(v)
    i, j = np.triu_indices(len(t), k=1)
    dx = lt[j] - lt[i]
    dy = lv[j] - lv[i]
    slopes = dy / dx
    delta1, delta2 = float(slopes.min()), float(slopes.max())
    if not (0.0 < delta1 <= delta2 < 1.0):
        raise ProbeError(f"scaling exponents ({delta1:.6g}, {delta2:.6g}) fall outside (0, 1)")
    # a1 (t/s)^delta1 <= phi(t)/phi(s): a1 = min exp(dy - delta1 dx)
    a1 = float(np.exp(np.min(dy - delta1 * dx)))
    a2 = float(np.exp(np.max(dy - delta2 * dx)))
    return ScalingProbeResult(delta1=delta1, delta2=delta2, a1=a1, a2=a2)

"""Golden-value regression suite.

Each entry recomputes a quantity through the numerical routes of the package
and compares it with a value frozen from an independent closed form or a
high-precision one-dimensional reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ball_kernels import green, killing
from .levy import StableModel
from .mc import exit_table
from .potentials import (
    BoundaryDensity,
    ExteriorDensity,
    ScalarField,
    green_potential,
    martin_potential,
    poisson_potential,
)
from .quadrature import Ball, integrate_interval
from .solver import Bump
from .trace import normal_derivative_dV, trace_measure


@dataclass(frozen=True)
class Golden:
    name: str
    value: float
    rtol: float
    compute: Callable[[], float]
    note: str


def _green_half() -> float:
    m = StableModel(1.0, 3)
    return green(m, Ball.unit(3), np.zeros(3), np.array([0.5, 0.0, 0.0]))


def _killing_center() -> float:
    return killing(StableModel(1.0, 3), Ball.unit(3), np.zeros(3))


def _exit_time_center() -> float:
    m = StableModel(0.5, 2)
    return green_potential(m, Ball.unit(2), ScalarField.constant(1.0), np.zeros(2), tol=1e-6)


def _martin_sigma_center() -> float:
    m = StableModel(1.5, 3)
    return martin_potential(m, Ball.unit(3), BoundaryDensity.const(1.0), np.zeros(3))


def _poisson_mass() -> float:
    m = StableModel(1.5, 2)
    return poisson_potential(m, Ball.unit(2), ExteriorDensity.power(0.0), np.array([0.9, 0.0]), tol=1e-9)


def _appendix_identity() -> float:
    return integrate_interval(lambda s: s / (1.0 + s) ** 3, 0.0, 2.0, tol=1e-13).value


def _trace_mass() -> float:
    m = StableModel(1.0, 3)
    u = ScalarField.from_delta_profile(lambda d: 4 * math.pi * (d * (2 - d)) ** (-0.5))
    return trace_measure(m, Ball.unit(3), u, 4)[0]


def _exit_table_mass() -> float:
    return exit_table(1.0, 3).total_mass


def _dv_radial_bump() -> float:
    m = StableModel(1.0, 3)
    b = Ball.unit(3)
    bump = Bump((0.0, 0.0, 0.0), 0.5)

    def prof(d):
        d = np.asarray(d, dtype=float)
        pts = np.zeros(d.shape + (3,))
        pts[..., 0] = 1 - d
        return bump(pts)

    psi = ScalarField(radial=prof, support=Ball((0.0, 0.0, 0.0), 0.5))
    return normal_derivative_dV(m, b, psi, np.array([0.0, 0.0, 1.0]))


GOLDEN = (
    Golden("green_center_half", 0.175493437951545657, 1e-10, _green_half,
           "G(0, y) with |y| = 1/2, alpha = 1, d = 3: sqrt(3)/pi^2"),
    Golden("killing_center", 1.27323954473516269, 1e-8, _killing_center,
           "killing function at the center, alpha = 1, d = 3: 4/pi"),
    Golden("exit_time_center", 0.860682226634146116, 1e-6, _exit_time_center,
           "G_D 1 at the center, alpha = 1/2, d = 2, gamma-function closed form"),
    Golden("martin_sigma_center", 12.5663706143591730, 1e-7, _martin_sigma_center,
           "M_D sigma at the center, alpha = 3/2, d = 3: 4 pi"),
    Golden("poisson_mass", 1.0, 1e-5, _poisson_mass,
           "mass of the Poisson kernel, alpha = 3/2, d = 2, delta = 0.1"),
    Golden("appendix_identity", 0.222222222222222222, 1e-12, _appendix_identity,
           "int_0^2 s / (1 + s)^3 ds = (1 + 1/2)^(-2) / 2"),
    Golden("trace_mass_martin_sigma", 12.5663706143591730, 1e-5, _trace_mass,
           "trace mass of M_D sigma at shrink index 4: 4 pi"),
    Golden("exit_table_mass", 1.0, 1e-8, _exit_table_mass,
           "total mass of the exit law table, alpha = 1, d = 3"),
    Golden("dv_radial_bump", 0.0112286526911793213, 1e-5, _dv_radial_bump,
           "V-derivative of G_D psi, radial bump of radius 1/2, alpha = 1, d = 3 (30-digit 1-d reduction)"),
)


def run(names=None) -> list[dict]:
    rows = []
    for g in GOLDEN:
        if names and g.name not in names:
            continue
        v = float(g.compute())
        err = abs(v - g.value) / abs(g.value)
        rows.append({"name": g.name, "value": v, "golden": g.value, "rel_err": err, "rtol": g.rtol,
                     "passed": bool(err <= g.rtol)})
    return rows

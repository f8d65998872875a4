"""Semilinear problems for the fractional Laplacian on a ball.

Kernels of the killed stable process, their potentials, two-sided estimate
audits, iterative solvers, boundary trace operators and a walk-on-spheres
Monte Carlo oracle.
"""

from .ball_kernels import green, killing, martin, modified_martin, poisson
from .levy import DomainError, StableModel, levy_density, phi_eval, renewal_eval
from .potentials import (
    BoundaryDensity,
    ExteriorDensity,
    ScalarField,
    green_potential,
    martin_potential,
    poisson_potential,
)
from .quadrature import Ball, DivergenceError
from .solver import ProblemSpec, integral_criterion, monotone_solve, picard_solve

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "BoundaryDensity",
    "DivergenceError",
    "DomainError",
    "ExteriorDensity",
    "ProblemSpec",
    "ScalarField",
    "StableModel",
    "green",
    "green_potential",
    "integral_criterion",
    "killing",
    "levy_density",
    "martin",
    "martin_potential",
    "modified_martin",
    "monotone_solve",
    "phi_eval",
    "picard_solve",
    "poisson",
    "poisson_potential",
    "renewal_eval",
    "__version__",
]

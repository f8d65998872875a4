"""Acceptance criteria A1-A15.

Each test records one PASS/FAIL line; the lines are printed in the terminal
summary by the hook in conftest.py.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from fracsemilinear import Ball, StableModel
from fracsemilinear.ball_kernels import green, killing, killing_radial, poisson
from fracsemilinear.cli import bump_field, trace_field
from fracsemilinear.estimates import (
    ProfileSpec,
    audit_stability,
    green_profile,
    poisson_profile,
    poisson_regime_fit,
    region_decomposition,
    truncated_green_potential,
)
from fracsemilinear.levy import levy_density
from fracsemilinear.mc import WoSConfig, wos_green, wos_poisson
from fracsemilinear.potentials import (
    ExteriorDensity,
    ScalarField,
    green_potential,
    green_potential_radial,
    poisson_potential,
    radial_grid,
)
from fracsemilinear.quadrature import (
    DivergenceError,
    SingularitySpec,
    appendix_identity,
    integrate_ball,
    integrate_interval,
)
from fracsemilinear.solver import (
    Bump,
    ProblemSpec,
    integral_criterion,
    monotone_solve,
    nonexistence_diagnostic,
    picard_solve,
    supersolution_fit,
    verify_weak_dual,
)
from fracsemilinear.trace import kernel_derivative, normal_derivative_dV, trace_measure

from conftest import ACCEPTANCE, axis_point

M13 = StableModel(1.0, 3)
B3 = Ball.unit(3)


def record(tag, ok, detail, started, limit):
    took = time.perf_counter() - started
    ok = bool(ok) and took < limit
    ACCEPTANCE[tag] = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}  ({took:.1f}s, limit {limit:.0f}s)"
    assert ok, ACCEPTANCE[tag]


def test_A1_appendix_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for a in (0.5, 1.0, 2.0, 10.0):
        for b in (0.5, 1.0, 2.0, 10.0):
            for d in (2, 3):
                q = integrate_interval(lambda s: s ** (d - 2) / (b + s) ** d, 0.0, a, tol=1e-13).value
                worst = max(worst, abs(q / appendix_identity(a, b, d) - 1))
    record("A1", worst < 1e-10, f"max rel err {worst:.2e} < 1e-10", t0, 1)


def test_A2_closed_form_values():
    t0 = time.perf_counter()
    # Riesz-type integral formula for G(0, y), |y| = 1/2: r0 = 3
    bconst = math.gamma(1.5) / (2 * math.pi**1.5 * math.gamma(0.5) ** 2)
    g_oracle = bconst * 0.5 ** (1 - 3) * integrate.quad(lambda s: s**-0.5 / (s + 1) ** 1.5, 0, 3, epsrel=1e-13)[0]
    g = green(M13, B3, np.zeros(3), np.array([0.5, 0.0, 0.0]))
    # killing at the center: 4 pi int_1^inf j(r) r^2 dr
    k_oracle = 4 * math.pi * integrate.quad(lambda r: levy_density(M13, r) * r * r, 1, np.inf, epsrel=1e-13)[0]
    k = killing(M13, B3, np.zeros(3))
    e1 = abs(g / g_oracle - 1)
    e2 = abs(k / k_oracle - 1)
    e3 = abs(g / (math.sqrt(3) / math.pi**2) - 1) + abs(k / (4 / math.pi) - 1)
    record("A2", max(e1, e2, e3) < 1e-6, f"green err {e1:.1e}, killing err {e2:.1e}", t0, 10)


def test_A3_poisson_normalization():
    t0 = time.perf_counter()
    worst = 0.0
    for a in (0.5, 1.0, 1.5):
        for d in (2, 3):
            m = StableModel(a, d)
            for delta in (0.5, 0.1, 0.01):
                v = poisson_potential(m, Ball.unit(d), ExteriorDensity.power(0.0), axis_point(d, delta))
                worst = max(worst, abs(v - 1))
    record("A3", worst < 1e-3, f"max |mass - 1| {worst:.1e} < 1e-3", t0, 120)


def _green_levy(m, b, x, z):
    def f(y):
        out = np.zeros(y.shape[:-1])
        ok = np.linalg.norm(y - x, axis=-1) > 1e-12
        yy = y[ok]
        out[ok] = green(m, b, np.broadcast_to(x, yy.shape), yy) * levy_density(m, np.linalg.norm(yy - z, axis=-1))
        return out

    return integrate_ball(f, b, SingularitySpec(x, m.dim - m.alpha), tol=2e-3, budget=8 * 10**6).value


def test_A4_kernel_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(20):
        a, d = (0.5, 1.0, 1.5)[i % 3], (2, 3)[i % 2]
        m, b = StableModel(a, d), Ball.unit(d)
        x = rng.normal(size=d)
        x *= rng.uniform(0.1, 0.8) / np.linalg.norm(x)
        z = rng.normal(size=d)
        z *= rng.uniform(1.2, 3.0) / np.linalg.norm(z)
        worst = max(worst, abs(_green_levy(m, b, x, z) / poisson(m, b, x, z) - 1))
    record("A4", worst < 0.02, f"20 pairs, max rel diff {worst:.1e} < 2e-2", t0, 300)


def test_A5_estimate_audits():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for kind in ("green", "poisson", "martin", "killing", "mdsigma"):
        r1, r2, change = audit_stability(M13, B3, kind, samples=1000)
        ok &= math.isfinite(r2.ratio_max) and r2.ratio_min > 0 and change < 0.2
        parts.append(f"{kind} {change:.3f}")
    record("A5", ok, "interval change " + ", ".join(parts) + " < 0.2", t0, 600)


def test_A6_green_of_killing_bound():
    t0 = time.perf_counter()
    kap = ScalarField.from_delta_profile(lambda t: killing_radial(M13, 1.0, t))
    sup = max(green_potential_radial(M13, B3, kap, float(d), tol=1e-7) for d in np.geomspace(1e-3, 1.0, 24))
    record("A6", sup <= 1 + 1e-3, f"grid sup {sup:.6f} <= 1.001", t0, 120)


def test_A7_profiles_and_window_endpoints():
    t0 = time.perf_counter()
    ok = True
    worst = 0.0
    for kind, betas in (("green_profile", (0.0, 0.5, 1.0, 1.25)), ("poisson_profile", (-0.75, 0.0, 0.25, 0.4))):
        for beta in betas:
            r1, r2, change = audit_stability(M13, B3, kind, samples=12, beta=beta)
            ok &= 0 < r2.ratio_min <= r2.ratio_max < math.inf and change < 0.2
            worst = max(worst, change)
    flagged = 0
    x = axis_point(3, 0.1)
    for fn, beta in ((green_profile, 1.5), (poisson_profile, 0.5)):
        try:
            fn(M13, B3, ProfileSpec.power(beta), x)
        except DivergenceError:
            flagged += 1
    record("A7", ok and flagged == 2, f"max interval change {worst:.3f}, endpoints flagged {flagged}/2", t0, 900)


@pytest.mark.xfail(strict=True, reason="regime table as literally stated has the two power regimes swapped")
def test_A8_literal_regime_table():
    # slope -beta claimed for beta < -alpha/2 and alpha/2 for beta > -alpha/2
    below = poisson_regime_fit(M13, B3, -0.75)
    above = poisson_regime_fit(M13, B3, 0.25)
    assert abs(below.slope - 0.75) < 0.05 and abs(above.slope - 0.5) < 0.05


def test_A8_regimes():
    t0 = time.perf_counter()
    slopes = {}
    ok = True
    for beta in (0.25, -0.25, -0.75, -0.9):
        fit = poisson_regime_fit(M13, B3, beta)
        slopes[beta] = fit.slope
        ok &= abs(fit.slope - fit.predicted_slope) < 0.05
    log = poisson_regime_fit(M13, B3, -0.5)
    ok &= log.regime == "log" and log.resid_log < log.resid_power
    detail = ", ".join(f"b={b}: {s:.3f}" for b, s in slopes.items())
    record("A8", ok, f"slopes {detail}; log resid {log.resid_log:.1e} < power {log.resid_power:.1e}", t0, 600)


def test_A9_region_decomposition():
    t0 = time.perf_counter()
    eta = 0.05
    worst = 0.0
    spreads = []
    for beta in (0.0, 0.5):
        prof = ProfileSpec.power(beta)
        anchors = []
        for d in (1e-3, 3e-3, 1e-2):
            x = axis_point(3, d)
            parts = region_decomposition(M13, B3, prof, x, eta)
            worst = max(worst, abs(parts["total"] / truncated_green_potential(M13, B3, prof, x, eta) - 1))
            # V(delta) int_0^eta U V dt
            anchors.append(parts["I2"] / (d**0.5 * eta ** (1.5 - beta) / (1.5 - beta)))
        spreads.append(max(anchors) / min(anchors))
    ok = worst < 0.01 and max(spreads) < 3
    record("A9", ok, f"sum rel err {worst:.1e} < 1e-2, I2 anchor spread {max(spreads):.3f}", t0, 600)


def test_A10_threshold_law():
    t0 = time.perf_counter()
    ok = True
    z = np.array([0.0, 0.0, 1.0])
    for a, p_star in ((0.5, 5 / 3), (1.0, 3.0), (1.5, 7.0)):
        m = StableModel(a, 3)
        assert (2 + a) / (2 - a) == pytest.approx(p_star, rel=1e-15)
        for p, finite in ((p_star - 0.1, True), (p_star, False), (p_star + 0.5, False)):
            pr = ProblemSpec.powers(p=p)
            ok &= integral_criterion(m, pr, "integral", method="exponent").finite is finite
            ok &= integral_criterion(m, pr, "integral", method="quadrature").finite is finite
            diag = nonexistence_diagnostic(m, B3, ProblemSpec.powers(p=p, h=1.0, sign="nonpositive-f"), z)
            ok &= diag.divergent is (not finite)
    record("A10", ok, "flip at p* = 5/3, 3, 7; exponent, quadrature and diagnostic agree", t0, 60)


BUMPS = (
    Bump((0.0, 0.0, 0.0), 0.5),
    Bump((0.3, 0.2, 0.1), 0.3),
    Bump((0.0, 0.0, 0.7), 0.25),
    Bump((-0.5, 0.0, 0.0), 0.4),
    Bump((0.2, -0.6, 0.0), 0.3),
)


def test_A11_monotone_solver():
    t0 = time.perf_counter()
    pr = ProblemSpec.powers(p=2.0, h=1.0)
    m1 = supersolution_fit(M13, B3, pr)[3]
    pr = pr.with_m(m1 / 2)
    u, tr = monotone_solve(M13, B3, pr)
    res = max(verify_weak_dual(M13, B3, u, pr, BUMPS))
    ok = tr.converged and tr.monotone_flag and tr.dominated_flag and tr.k_final < 100 and res < 1e-2
    record("A11", ok, f"{tr.k_final} iterations, monotone {tr.monotone_flag}, dominated {tr.dominated_flag}, "
                      f"weak residual {res:.1e}", t0, 600)


def test_A12_uniqueness_surrogate():
    t0 = time.perf_counter()
    tol = 1e-6
    pr = ProblemSpec.powers(p=1.0, h=1.0, m=0.25, sign="general")
    u0, _ = picard_solve(M13, B3, pr, 32, tol=tol)
    C = u0._cache["bound"]
    u1, _ = picard_solve(M13, B3, pr, 32, tol=tol, v0=C)
    nodes = radial_grid(B3, 32)
    diff = float(np.max(np.abs(u0.radial(nodes) - u1.radial(nodes))))
    record("A12", diff <= 2 * tol * C, f"f = -t/4: sup diff {diff:.1e} <= 2 tol C = {2 * tol * C:.1e}", t0, 300)


def test_A13_trace_identities():
    t0 = time.perf_counter()
    ms = trace_measure(M13, B3, trace_field(M13, B3, "martin_sigma"), 8)[0]
    gm = trace_measure(M13, B3, trace_field(M13, B3, "green_one"), 8)[0]
    pm = trace_measure(M13, B3, trace_field(M13, B3, "poisson_power", 0.0), 8)[0]
    ok = abs(ms / (4 * math.pi) - 1) < 0.02 and gm < 0.02 * ms and pm < 0.02 * ms
    record("A13", ok, f"k=8: M sigma {ms / (4 * math.pi):.4f} x 4pi, G1 {gm / ms:.4f}, P {pm / ms:.4f} of M mass",
           t0, 900)


def test_A14_normal_derivative():
    t0 = time.perf_counter()
    z = np.array([0.0, 0.0, 1.0])
    worst = 0.0
    for c, r in (((0.0, 0.0, 0.0), 0.5), ((0.3, 0.2, 0.1), 0.3), ((0.0, 0.0, 0.5), 0.3)):
        psi = bump_field(B3, c, r)
        worst = max(worst, abs(normal_derivative_dV(M13, B3, psi, z) / kernel_derivative(M13, B3, psi, z) - 1))
    record("A14", worst < 0.01, f"3 bumps, max rel diff {worst:.1e} < 1e-2", t0, 300)


def test_A15_monte_carlo():
    t0 = time.perf_counter()
    one = ScalarField.constant(1.0)
    g = ExteriorDensity.power(0.25)
    zs = []
    repro = True
    for i, x in enumerate(([0.3, 0.0, 0.0], [0.0, 0.5, 0.2], [-0.4, 0.4, 0.3])):
        x = np.array(x)
        cfg = WoSConfig(samples=100_000, seed=11 + i)
        eg = wos_green(M13, B3, one, x, cfg)
        ep = wos_poisson(M13, B3, g, x, cfg)
        zs.append((eg.mean - green_potential(M13, B3, one, x)) / eg.std_error)
        zs.append((ep.mean - poisson_potential(M13, B3, g, x)) / ep.std_error)
        repro &= wos_green(M13, B3, one, x, cfg) == eg and wos_poisson(M13, B3, g, x, cfg) == ep
    worst = max(abs(v) for v in zs)
    record("A15", worst < 3 and repro, f"max |z| {worst:.2f} < 3, bit-reproducible {repro}", t0, 600)

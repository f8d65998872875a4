import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracsemilinear.ball_kernels import (
    BoundaryBlowupError,
    green,
    killing,
    martin,
    modified_martin,
    poisson,
)
from fracsemilinear.levy import StableModel, levy_density
from fracsemilinear.quadrature import Ball


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


interior3 = st.tuples(st.floats(-0.55, 0.55), st.floats(-0.55, 0.55), st.floats(-0.55, 0.55))
alphas = st.floats(0.1, 1.9)


def test_green_closed_form_value_against_brute_force(m13, ball3):
    # oracle: incomplete integral int_0^3 s^-1/2 (1+s)^-3/2 ds by scipy, times B(3,1) |x-y|^-2
    inner = integrate.quad(lambda s: s**-0.5 * (1 + s) ** -1.5, 0, 3, epsabs=1e-14, epsrel=1e-13)[0]
    oracle = inner / (4 * math.pi**2) / 0.25
    val = green(m13, ball3, np.zeros(3), np.array([0.5, 0, 0]))
    assert val == pytest.approx(oracle, rel=1e-6)
    assert val == pytest.approx(math.sqrt(3) / math.pi**2, rel=1e-12)


def test_green_zero_outside(m13, ball3):
    assert green(m13, ball3, np.zeros(3), np.array([1.5, 0, 0])) == 0.0
    assert green(m13, ball3, np.array([0, 2.0, 0]), np.zeros(3)) == 0.0


@given(interior3, interior3, alphas)
def test_green_symmetric(x, y, a):
    x, y = np.array(x), np.array(y)
    if np.linalg.norm(x - y) < 1e-3:
        return
    m = StableModel(a, 3)
    b = Ball.unit(3)
    assert green(m, b, x, y) == pytest.approx(green(m, b, y, x), rel=1e-12)


@settings(max_examples=30)
@given(st.floats(0.05, 0.9), st.floats(0.05, 0.9), alphas)
def test_green_scaling_with_radius(r1, r2, a):
    # G_{B_R}(Rx, Ry) = R^(alpha-d) G_{B_1}(x, y)
    m = StableModel(a, 2)
    x, y = np.array([r1, 0.0]), np.array([0.0, -r2])
    R = 3.0
    big = green(m, Ball.unit(2, R), R * x, R * y)
    assert big == pytest.approx(R ** (a - 2) * green(m, Ball.unit(2), x, y), rel=1e-10)


def test_poisson_value_center(m13, ball3):
    val = poisson(m13, ball3, np.zeros(3), np.array([2.0, 0, 0]))
    assert val == pytest.approx(1 / (16 * math.sqrt(3) * math.pi**2), rel=1e-12)


def test_poisson_value_against_green_levy_oracle(m13, ball3):
    # x = center: P(0, z) = int_B G(0, y) j(|y - z|) dy; radial oracle with scipy
    z = 2.0
    g0 = lambda r: green(m13, ball3, np.zeros(3), np.array([r, 0, 0]))  # noqa: E731

    def shell(r):
        # sphere average of j(|r w - z e|): 2 pi r^2 int_-1^1 j(sqrt(r^2+z^2-2rz mu)) dmu
        return 2 * math.pi * r * r * integrate.quad(
            lambda mu: levy_density(m13, math.sqrt(r * r + z * z - 2 * r * z * mu)), -1, 1)[0]

    oracle = integrate.quad(lambda r: g0(r) * shell(r), 0, 1, limit=200, epsrel=1e-9)[0]
    assert poisson(m13, ball3, np.zeros(3), np.array([z, 0, 0])) == pytest.approx(oracle, rel=1e-6)


def test_poisson_boundary_blowup(m13, ball3):
    x = np.array([0.2, 0.1, 0])
    z0 = np.array([0.0, 0.0, 1.0])
    ref = poisson(m13, ball3, x, 1.5 * z0) * 0.5**0.5
    for eps in (1e-3, 1e-5, 1e-7):
        assert poisson(m13, ball3, x, (1 + eps) * z0) >= ref * eps**-0.5
    with pytest.raises(BoundaryBlowupError):
        poisson(m13, ball3, x, z0)


def test_martin_center_normalization(m13, ball3):
    for z in ([1, 0, 0], [0, -1, 0], _unit([1, 2, 3])):
        assert martin(m13, ball3, np.zeros(3), np.asarray(z, float)) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
def test_martin_limit_definition(a):
    m = StableModel(a, 3)
    b = Ball.unit(3)
    x = np.array([0.3, -0.2, 0.1])
    z = _unit([1.0, 1.0, 0.5])
    eps = 1e-4
    y = (1 - eps) * z
    fd = green(m, b, x, y) / green(m, b, np.zeros(3), y)
    assert abs(fd / martin(m, b, x, z) - 1) < 1e-2


@given(interior3, st.floats(0, 2 * math.pi), st.floats(-1, 1), alphas)
def test_martin_structure(x, phi, ct, a):
    m = StableModel(a, 3)
    b = Ball.unit(3)
    x = np.array(x)
    st_ = math.sqrt(1 - ct * ct)
    z = np.array([st_ * math.cos(phi), st_ * math.sin(phi), ct])
    val = martin(m, b, x, z) * np.linalg.norm(x - z) ** 3 / (1 - x @ x) ** (a / 2)
    assert val == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("a,d", [(0.5, 2), (1.0, 3), (1.5, 3)])
def test_modified_martin_limit_definition(a, d):
    m = StableModel(a, d)
    b = Ball.unit(d)
    x = np.zeros(d)
    x[0] = 0.3
    z = np.zeros(d)
    z[-1] = 1.0
    eps = 1e-4
    fd = green(m, b, x, (1 - eps) * z) / eps ** (a / 2)
    assert abs(fd / modified_martin(m, b, x, z) - 1) < 1e-2


@given(interior3, alphas)
def test_modified_martin_ratio_is_martin(x, a):
    m = StableModel(a, 3)
    b = Ball.unit(3)
    x = np.array(x)
    z = _unit([0.2, -1.0, 0.4])
    r = modified_martin(m, b, x, z) / modified_martin(m, b, np.zeros(3), z)
    assert r == pytest.approx(martin(m, b, x, z), rel=1e-12)


def test_modified_martin_center_independent_of_z(m13, ball3):
    vals = [modified_martin(m13, ball3, np.zeros(3), _unit(z)) for z in ([1, 0, 0], [0, 1, 1], [-1, 2, 0.5])]
    assert np.ptp(vals) <= 1e-14 * max(vals)


def test_killing_center_against_radial_oracle(m13, ball3):
    oracle = 4 * math.pi * integrate.quad(lambda r: r * r * levy_density(m13, r), 1, np.inf, epsrel=1e-12)[0]
    val = killing(m13, ball3, np.zeros(3))
    assert val == pytest.approx(oracle, rel=1e-6)
    assert val == pytest.approx(4 / math.pi, rel=1e-9)


def test_killing_times_v2_bounded(m13, ball3):
    vals = []
    for delta in np.geomspace(1e-3, 1.0, 12):
        x = np.array([1 - delta, 0, 0])
        vals.append(killing(m13, ball3, x) * delta)
    assert max(vals) / min(vals) < 10


@settings(max_examples=25)
@given(st.floats(0.0, 0.95), st.floats(0, 2 * math.pi))
def test_killing_radial(r, phi):
    m = StableModel(1.2, 2)
    b = Ball.unit(2)
    a1 = killing(m, b, np.array([r, 0.0]))
    a2 = killing(m, b, r * np.array([math.cos(phi), math.sin(phi)]))
    assert a1 == pytest.approx(a2, rel=1e-8)

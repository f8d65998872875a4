import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsemilinear.estimates import (
    GridSpec,
    ProfileSpec,
    audit_kernel_estimate,
    check_U_conditions,
    decade_exponent,
    green_profile,
    loglog_slope,
    poisson_profile,
    poisson_regime,
    region_decomposition,
    truncated_green_potential,
)
from fracsemilinear.levy import StableModel
from fracsemilinear.potentials import ExteriorDensity, ScalarField, green_potential_radial, poisson_potential
from fracsemilinear.quadrature import Ball, DivergenceError

from conftest import axis_point


def test_u_conditions_power_inside_window(m13):
    f = check_U_conditions(m13, ProfileSpec.power(1.2))
    assert f.U1 and f.U2 and f.U3 and f.U4


def test_u1_fails_at_endpoint(m13):
    assert not check_U_conditions(m13, ProfileSpec.power(1.5)).U1


def test_u_conditions_constant_rule(m13):
    assert check_U_conditions(m13, ProfileSpec(rule=lambda t: np.ones_like(t))).all


def test_u_conditions_rule_matches_power(m13):
    for beta in (0.3, 1.0, 1.4):
        by_rule = check_U_conditions(m13, ProfileSpec(rule=lambda t, b=beta: t ** (-b)))
        assert by_rule.U1 == check_U_conditions(m13, ProfileSpec.power(beta)).U1


@given(st.floats(-3, 3))
def test_decade_exponent_of_power(e):
    # returns e + 1, the exponent of the decade integrals
    assert decade_exponent(lambda t: t**e) == pytest.approx(e + 1, abs=1e-6)


@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_loglog_slope_exact(s, c):
    x = np.geomspace(1e-4, 1, 9)
    assert loglog_slope(x, c * x**s) == pytest.approx(s, abs=1e-9)


def test_green_profile_constant(m13, ball3):
    r = [sum(green_profile(m13, ball3, ProfileSpec.power(0.0), axis_point(3, d))) / d**0.5
         for d in np.geomspace(1e-3, 1.0, 8)]
    assert max(r) / min(r) < 5


def test_green_profile_ratio_inverse_distance(m13, ball3):
    f = ScalarField.delta_power_field(1.0)
    r = []
    for d in np.geomspace(1e-3, 1.0, 8):
        direct = green_potential_radial(m13, ball3, f, d)
        r.append(direct / sum(green_profile(m13, ball3, ProfileSpec.power(1.0), axis_point(3, d))))
    assert max(r) / min(r) < 5


def test_green_profile_diverges_at_window_end(m13, ball3):
    with pytest.raises(DivergenceError):
        green_profile(m13, ball3, ProfileSpec.power(1.5), axis_point(3, 0.1))


def test_poisson_profile_ratio(m13, ball3):
    g = ExteriorDensity.power(0.25)
    r = [poisson_potential(m13, ball3, g, axis_point(3, d)) / poisson_profile(m13, ball3, ProfileSpec.power(0.25),
                                                                             axis_point(3, d))
         for d in np.geomspace(1e-3, 0.5, 8)]
    assert max(r) / min(r) < 5


def test_poisson_profile_diverges_at_window_end(m13, ball3):
    with pytest.raises(DivergenceError):
        poisson_profile(m13, ball3, ProfileSpec.power(0.5), axis_point(3, 0.1))


@given(st.floats(0.1, 1.9), st.floats(-3, 1))
def test_poisson_regime_table(a, beta):
    m = StableModel(a, 3)
    name, slope = poisson_regime(m, beta)
    if beta > -a / 2:
        assert (name, slope) == ("power-beta", -beta)
    elif beta < -a / 2:
        assert (name, slope) == ("power-alpha", a / 2)
    else:
        assert name == "log"


@pytest.mark.parametrize("kind", ["green", "poisson", "martin", "killing", "mdsigma"])
def test_audit_kinds_finite(m13, ball3, kind):
    rep = audit_kernel_estimate(m13, ball3, kind, GridSpec(1e-3, 125))
    assert 0 < rep.ratio_min <= rep.ratio_max < math.inf
    assert rep.passes


def test_region_decomposition_sum_and_anchor(m13, ball3):
    prof = ProfileSpec.power(0.5)
    eta = 0.05
    anchors = []
    for d in (1e-3, 3e-3, 1e-2):
        x = axis_point(3, d)
        parts = region_decomposition(m13, ball3, prof, x, eta)
        assert parts["branch"] == "near"
        total = truncated_green_potential(m13, ball3, prof, x, eta)
        assert parts["total"] == pytest.approx(total, rel=1e-2)
        assert (parts["I1"] + parts["I5"]) / parts["I3"] < 10
        anchor = d**0.5 * (eta ** (1 - 0.5 + 0.5) / 1.0)  # int_0^eta t^-1/2 t^1/2 dt = eta
        anchors.append(parts["I2"] / anchor)
    assert max(anchors) / min(anchors) < 3


def test_region_decomposition_away_branch(m13, ball3):
    x = axis_point(3, 0.5)
    parts = region_decomposition(m13, ball3, ProfileSpec.power(0.0), x, 0.05)
    assert parts["branch"] == "away"
    assert parts["total"] == pytest.approx(truncated_green_potential(m13, ball3, ProfileSpec.power(0.0), x, 0.05),
                                           rel=1e-2)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 1.3))
def test_green_profile_positive(beta):
    m = StableModel(1.0, 3)
    gp = green_profile(m, Ball.unit(3), ProfileSpec.power(beta), axis_point(3, 0.01))
    assert gp.near > 0 and gp.far > 0


def test_poisson_profile_near_window_end(m13, ball3):
    # beta = 0.45 leaves the integrand like t^-0.95 at zero
    prof = ProfileSpec.power(0.45)
    rule = ProfileSpec(rule=lambda t: np.asarray(t) ** -0.45)
    x = axis_point(3, 0.01)
    a = poisson_profile(m13, ball3, prof, x)
    assert a == pytest.approx(poisson_profile(m13, ball3, rule, x), rel=1e-3)
    assert math.isfinite(a) and a > 0

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsemilinear.levy import (
    DomainError,
    ProbeError,
    StableModel,
    levy_density,
    phi_eval,
    renewal_eval,
    weak_scaling_probe,
)

alphas = st.floats(0.05, 1.95)
dims = st.sampled_from([2, 3])


def test_phi_values():
    assert phi_eval(StableModel(1.0, 3), 1.0) == 1.0
    assert phi_eval(StableModel(1.0, 3), 4.0) == 2.0
    assert phi_eval(StableModel(1.5, 3), 2.0) == pytest.approx(2**0.75, rel=1e-15)


def test_renewal_values():
    assert renewal_eval(StableModel(1.0, 2), 4.0) == 2.0
    for a in (0.3, 1.0, 1.7):
        assert renewal_eval(StableModel(a, 3), 1.0) == 1.0
    assert renewal_eval(StableModel(1.0, 3), 0.0) == 0.0


def test_levy_density_value_d3_alpha1():
    # C(3, 1) = Gamma(2) / (pi^1.5 Gamma(1/2)) = 1 / pi^2
    assert levy_density(StableModel(1.0, 3), 1.0) == pytest.approx(1 / math.pi**2, rel=1e-14)


def test_levy_constant_against_fourier_oracle():
    # independent route: j = C r^(-d-alpha) with C = 2^alpha Gamma((d+alpha)/2) / (pi^(d/2) |Gamma(-alpha/2)|)
    for a, d in [(0.5, 2), (1.0, 3), (1.5, 3), (1.2, 2)]:
        c = 2**a * math.gamma((d + a) / 2) / (math.pi ** (d / 2) * abs(math.gamma(-a / 2)))
        assert StableModel(a, d).levy_const == pytest.approx(c, rel=1e-13)


def test_domain_errors():
    with pytest.raises(DomainError):
        StableModel(2.0, 3)
    with pytest.raises(DomainError):
        StableModel(1.0, 4)
    with pytest.raises(DomainError):
        phi_eval(StableModel(1.0, 3), 0.0)
    with pytest.raises(DomainError):
        renewal_eval(StableModel(1.0, 3), -1.0)
    with pytest.raises(DomainError):
        levy_density(StableModel(1.0, 3), 0.0)


@given(alphas, dims, st.floats(1e-4, 1e4))
def test_renewal_phi_identity(a, d, t):
    m = StableModel(a, d)
    assert renewal_eval(m, t) ** 2 * phi_eval(m, t**-2) == pytest.approx(1.0, rel=1e-12)


@given(alphas, dims, st.floats(1e-3, 1e3))
def test_levy_scaling(a, d, r):
    m = StableModel(a, d)
    assert levy_density(m, 2 * r) / levy_density(m, r) == pytest.approx(2.0 ** (-d - a), rel=1e-12)


@given(alphas, dims)
def test_levy_over_phi_constant(a, d):
    m = StableModel(a, d)
    r = np.geomspace(1e-3, 1e3, 25)
    q = levy_density(m, r) / (phi_eval(m, r**-2.0) * r ** (-d))
    assert np.ptp(q) <= 1e-12 * q.max()


@given(alphas, dims)
def test_levy_monotone(a, d):
    r = np.geomspace(1e-2, 1e2, 50)
    assert np.all(np.diff(levy_density(StableModel(a, d), r)) < 0)


def test_probe_exact_power():
    t = np.geomspace(1, 100, 30)
    res = weak_scaling_probe(list(zip(t, t**0.5)), (1, 100))
    assert res.delta1 == pytest.approx(0.5, abs=1e-9)
    assert res.delta2 == pytest.approx(0.5, abs=1e-9)


def test_probe_mixed_power_against_pairwise_oracle():
    t = np.geomspace(1, 100, 30)
    v = t**0.3 + t**0.7
    res = weak_scaling_probe(list(zip(t, v)), (1, 100))
    slopes = [math.log(v[j] / v[i]) / math.log(t[j] / t[i]) for i in range(30) for j in range(i + 1, 30)]
    assert res.delta1 == pytest.approx(min(slopes), rel=1e-12)
    assert res.delta2 == pytest.approx(max(slopes), rel=1e-12)
    assert 0.3 <= res.delta1 <= res.delta2 <= 0.7


def test_probe_constant_rejected():
    t = np.geomspace(1, 100, 30)
    with pytest.raises(ProbeError):
        weak_scaling_probe(list(zip(t, np.ones_like(t))), (1, 100))


@settings(max_examples=30)
@given(st.floats(0.05, 0.95), st.floats(0.0, 3.0))
def test_probe_bounds_hold_on_samples(e, c):
    t = np.geomspace(1, 100, 20)
    v = t**e + c * t ** (e / 2)
    res = weak_scaling_probe(list(zip(t, v)), (1, 100))
    assert 0 < res.delta1 <= res.delta2 < 1
    i, j = np.triu_indices(20, 1)
    ratio = v[j] / v[i]
    s = t[j] / t[i]
    assert np.all(res.a1 * s**res.delta1 <= ratio * (1 + 1e-12))
    assert np.all(ratio <= res.a2 * s**res.delta2 * (1 + 1e-12))

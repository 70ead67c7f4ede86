import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annulus_lab.dyadic import (MollifierSpec, bessel_J, bessel_j0, chi1, chi1_hat,
                                chi_annulus, chi_hat, dyadic_bound_report, exp_sum_S,
                                partition_residual, phi_flat, sample_points)
from annulus_lab.errors import ArgumentError


def j0_quad(z):
    from scipy.integrate import IntegrationWarning, quad

    with warnings.catch_warnings():
        # roundoff warnings near the requested floor are expected
        warnings.simplefilter("ignore", IntegrationWarning)
        v, _ = quad(lambda t: math.cos(z * math.sin(t)), 0, math.pi, limit=400,
                    epsabs=1e-14, epsrel=1e-13)
    return v / math.pi


@pytest.mark.parametrize("z", [0.0, 0.5, 2.404825557695773, 7.9, 8.1, 15.0, 19.9, 20.5, 60.0, 300.0])
def test_j0_against_quadrature(z):
    want = j0_quad(z)
    assert abs(bessel_j0(z) - want) <= 1e-12 + 1e-10 * abs(want)


def test_j0_against_scipy_dense():
    from scipy.special import j0

    zs = np.linspace(0, 400, 4001)
    got = np.array([bessel_j0(z) for z in zs])
    assert np.max(np.abs(got - j0(zs))) < 1e-12


def test_bessel_J_normalization():
    # bessel_J(r) is the circle transform 2 pi J0(2 pi r)
    assert bessel_J(0.0) == pytest.approx(2 * math.pi)
    assert bessel_J(0.5) == pytest.approx(2 * math.pi * j0_quad(math.pi), abs=1e-12)


def test_chi1_transform_pair():
    from scipy.integrate import quad

    for u in (0.0, 0.2, 0.5, 0.7):
        v, _ = quad(lambda t: chi1(t) * math.cos(2 * math.pi * t * u), -200, 200, limit=2000)
        assert v == pytest.approx(float(chi1_hat(u)), abs=2e-6)
    assert chi1_hat(1.0) == 0 and chi1_hat(1.5) == 0
    assert chi1_hat(0.0) == 1


def test_chi_hat_at_zero():
    # with the delta^-1 normalisation chi_hat(0) = lam * delta * 2 pi
    assert chi_hat(10.0, 0.2, np.array([0.0, 0.0])) == pytest.approx(2 * math.pi * 10.0 * 0.2)


def test_mollifier_floor_positive():
    m = MollifierSpec(20, 0.2)
    assert m.floor == pytest.approx(0.1176, abs=1e-3)


def test_partition_of_unity():
    r = np.linspace(0, 1e6, 20001)
    assert np.max(partition_residual(r)) < 1e-12


@pytest.mark.parametrize("lam,delta", [(10.5, 0.3), (20, 0.2), (30, 0.1)])
def test_poisson_spectral_equals_spatial(lam, delta):
    for x in sample_points(4, 11):
        a = phi_flat(lam, delta, x, "spectral")
        b = phi_flat(lam, delta, x, "spatial")
        assert abs(a - b) < 1e-6


def test_exp_sum_engines_agree():
    a = exp_sum_S(100.0, 0.05, 16, (0.3, 0.7), engine="numpy")
    b = exp_sum_S(100.0, 0.05, 16, (0.3, 0.7), engine="auto")
    assert abs(a.value - b.value) < 1e-9 * max(1, abs(a.value))
    assert a.count == b.count


def test_exp_sum_trivial_bound():
    for M in (1, 4, 16):
        s = exp_sum_S(200.0, 1 / 64, M, (0.1, 0.2))
        assert abs(s.value) <= s.abs_sum + 1e-9
        assert s.abs_sum <= s.trivial_envelope * (1 + 1e-12)


def test_dyadic_report_deterministic():
    a = dyadic_bound_report(64.0, 1 / 16, 4, seed=3)
    b = dyadic_bound_report(64.0, 1 / 16, 4, seed=3)
    assert a.to_csv() == b.to_csv()
    assert [r.M for r in a.rows] == [1, 2, 4, 8, 16]


def test_unknown_mode():
    with pytest.raises(ArgumentError):
        phi_flat(10.0, 0.2, (0, 0), mode="bogus")


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 3))
def test_property_chi1_hat_even_and_bounded(u):
    assert chi1_hat(u) == chi1_hat(-u)
    assert 0 <= chi1_hat(u) <= 1


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 45.0))
def test_property_j0_against_quadrature(z):
    want = j0_quad(z)
    assert abs(bessel_j0(z) - want) <= 1e-11

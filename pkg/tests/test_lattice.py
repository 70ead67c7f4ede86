import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annulus_lab.errors import ArgumentError, InputRangeError
from annulus_lab.lattice import (AnnulusSpec, CurveSpec, LatticeSet, brute_force_points,
                                 count_annulus, enumerate_annulus,
                                 enumerate_curve_neighborhood, factorize, r2,
                                 two_square_reps)


def brute_annulus(lam, delta):
    lo, hi = Fraction(lam) - Fraction(delta), Fraction(lam) + Fraction(delta)
    R = math.ceil(lam + delta) + 1
    return sorted(brute_force_points(lambda x, y: lo * lo < x * x + y * y < hi * hi,
                                     range(-R, R + 1), range(-R, R + 1)))


def brute_r2(n):
    R = math.isqrt(n) + 1
    return sum(1 for x in range(-R, R + 1) for y in range(-R, R + 1) if x * x + y * y == n)


# frozen values

def test_r2_frozen():
    assert [r2(0), r2(1), r2(2), r2(3), r2(25), r2(21), r2(65)] == [1, 4, 4, 0, 12, 0, 16]


def test_annulus_frozen_counts():
    assert len(enumerate_annulus(AnnulusSpec(5, 0.5))) == 28
    assert len(enumerate_annulus(AnnulusSpec(5, 0.01))) == 12
    assert len(enumerate_annulus(AnnulusSpec(4.6, 0.01))) == 0


def test_twelve_point_circle():
    pts = enumerate_annulus(AnnulusSpec(5, 0.01)).as_set()
    assert pts == {(0, 5), (0, -5), (5, 0), (-5, 0), (3, 4), (3, -4), (-3, 4), (-3, -4),
                   (4, 3), (4, -3), (-4, 3), (-4, -3)}


def test_strict_boundary_excluded():
    # 5 - 0 < |k| needs |k| > 4 exactly; points of norm exactly 16 or 36 are excluded
    pts = enumerate_annulus(AnnulusSpec(5, 1.0))
    norms = {x * x + y * y for x, y in pts}
    assert 16 not in norms and 36 not in norms
    assert norms <= set(range(17, 36))


# oracles

@pytest.mark.parametrize("method", ["columns", "shells"])
@pytest.mark.parametrize("lam,delta", [(5, 0.5), (7.3, 0.2), (10, 1.5), (13, 0.05), (20.5, 0.7)])
def test_enumeration_matches_brute_force(lam, delta, method):
    got = [tuple(p) for p in enumerate_annulus(AnnulusSpec(lam, delta), method=method)]
    assert got == brute_annulus(lam, delta)


def test_r2_matches_brute_force_small():
    for n in range(0, 400):
        assert r2(n) == brute_r2(n), n


def test_two_square_reps_are_exact():
    for n in (1, 2, 5, 25, 65, 325, 1105, 2 * 3 * 3 * 5):
        reps = two_square_reps(n)
        assert len(reps) == r2(n)
        assert len(set(reps)) == len(reps)
        assert all(x * x + y * y == n for x, y in reps)


def test_factorize_roundtrip():
    for n in (2, 97, 360, 9991, 2**31 - 1, 600851475143):
        f = factorize(n)
        assert math.prod(p**e for p, e in f.items()) == n


def test_r2_rejects_negative():
    with pytest.raises(InputRangeError):
        r2(-1)


def test_spec_validation():
    with pytest.raises(ArgumentError):
        AnnulusSpec(2, 0.1)
    with pytest.raises(ArgumentError):
        AnnulusSpec(10, 0)
    with pytest.raises(ArgumentError):
        AnnulusSpec(10, 10)
    s = AnnulusSpec.from_alpha(1024, 0.5)
    assert abs(s.delta - 1 / 32) < 1e-15
    assert abs(s.alpha - 0.5) < 1e-12


def test_point_count_scales_like_area():
    spec = AnnulusSpec.from_alpha(1024, 1 / 3)
    assert len(enumerate_annulus(spec)) == 1364
    assert 0.5 < count_annulus(spec) / spec.predicted_count() < 1.5


# curves

def test_parabola_points_frozen():
    got = enumerate_curve_neighborhood(CurveSpec.parabola(), 100, 1e-6).as_set()
    assert got == {(10 * l, l * l) for l in range(-10, 11)}


def test_parabola_matches_brute_force():
    lam, delta = 30.0, 0.4

    def dist(x, y):
        ts = np.linspace(-1, 1, 200001)
        return np.min(np.hypot(lam * ts - x, lam * ts**2 - y))

    cands = brute_force_points(lambda x, y: dist(x, y) < delta + 1e-3,
                               range(-31, 32), range(-1, 32))
    want = {p for p in cands if dist(*p) < delta}
    assert enumerate_curve_neighborhood(CurveSpec.parabola(), lam, delta).as_set() == want


def test_ellipse_matches_scipy_oracle():
    from scipy.optimize import minimize_scalar

    lam, delta, a, b = 40.0, 0.35, 1.0, 0.6
    A, B = lam * a, lam * b

    def dist(x, y):
        best = math.inf
        for t0 in np.linspace(0, 2 * math.pi, 17):
            r = minimize_scalar(lambda t: math.hypot(A * math.cos(t) - x, B * math.sin(t) - y),
                                bracket=(t0 - 0.2, t0 + 0.2), tol=1e-14)
            best = min(best, r.fun)
        return best

    got = enumerate_curve_neighborhood(CurveSpec.ellipse(a, b), lam, delta).as_set()
    want = set()
    for x in range(-41, 42):
        for y in range(-25, 26):
            v = (x / A) ** 2 + (y / B) ** 2
            if abs(math.sqrt(v) - 1) * min(A, B) > 2 * delta + 1 and abs(math.sqrt(v) - 1) > 0.1:
                continue
            if dist(x, y) < delta:
                want.add((x, y))
    assert got == want
    assert len(enumerate_curve_neighborhood(CurveSpec.ellipse(1, 0.5), 200, 0.3)) == 604


def test_circle_curve_delegates():
    assert len(enumerate_curve_neighborhood(CurveSpec.circle(), 5, 0.5)) == 28


def test_curve_spec_validation():
    with pytest.raises(ArgumentError):
        CurveSpec.ellipse(-1, 1)


# serialization

def test_csv_json_roundtrip():
    s = enumerate_annulus(AnnulusSpec(13, 0.3))
    assert LatticeSet.from_csv(s.to_csv()) == s
    assert LatticeSet.from_json(s.to_json()) == s
    assert s.to_csv().splitlines()[0] == "x,y"


def test_points_sorted_and_readonly():
    s = enumerate_annulus(AnnulusSpec(9, 0.4))
    p = s.points
    assert not p.flags.writeable
    assert [tuple(r) for r in p] == sorted(tuple(r) for r in p)


# properties

@settings(max_examples=40, deadline=None)
@given(st.floats(2.5, 60), st.floats(0.01, 2.0))
def test_property_methods_agree_and_strict(lam, delta):
    if delta >= lam:
        return
    spec = AnnulusSpec(lam, delta)
    a = enumerate_annulus(spec, method="columns")
    b = enumerate_annulus(spec, method="shells")
    assert a == b
    lo, hi = Fraction(lam) - Fraction(delta), Fraction(lam) + Fraction(delta)
    for x, y in a:
        n = x * x + y * y
        assert lo * lo < n < hi * hi


@settings(max_examples=40, deadline=None)
@given(st.floats(2.5, 60), st.floats(0.01, 2.0))
def test_property_symmetry(lam, delta):
    if delta >= lam:
        return
    s = enumerate_annulus(AnnulusSpec(lam, delta)).as_set()
    assert s == {(-x, y) for x, y in s} == {(y, x) for x, y in s}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_property_r2_multiplicative(n):
    f = factorize(n) if n > 1 else {}
    if n == 0:
        assert r2(0) == 1
        return
    expect = 4
    for p, e in f.items():
        if p % 4 == 3:
            expect *= 1 if e % 2 == 0 else 0
        elif p % 4 == 1:
            expect *= e + 1
    assert r2(n) == expect

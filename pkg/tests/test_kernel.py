import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annulus_lab.errors import ArgumentError, CapacityError
from annulus_lab.kernel import (FourierSupport, KernelGrid, evaluate, grid_size,
                                knapp_support, lp_norm, ratio_2_to_p, read_grid,
                                synthesize, write_grid)
from annulus_lab.lattice import AnnulusSpec, LatticeSet, enumerate_annulus


def annulus_support(lam, delta):
    return FourierSupport(enumerate_annulus(AnnulusSpec(lam, delta)))


def test_frozen_norms():
    g = synthesize(annulus_support(5, 0.5))
    assert g.samples[0, 0].real == pytest.approx(28)
    assert lp_norm(g, 2).value == pytest.approx(math.sqrt(28), rel=1e-12)
    assert lp_norm(g, math.inf).value == pytest.approx(28, rel=1e-9)
    assert lp_norm(g, 4).power == pytest.approx(2940, rel=1e-12)


def test_parseval_method():
    g = synthesize(annulus_support(5, 0.5))
    r = lp_norm(g, 2, method="parseval")
    assert r.value == pytest.approx(math.sqrt(28)) and r.error_estimate == 0
    with pytest.raises(ArgumentError):
        lp_norm(g, 4, method="parseval")


def test_samples_match_direct_evaluation():
    sup = FourierSupport.from_points([(1, 2), (-3, 0), (0, 5)], [1, 2j, -0.5])
    g = synthesize(sup)
    N = g.N
    xs = np.array([[i / N, j / N] for i in (0, 3, 7) for j in (1, 5)])
    direct = evaluate(sup, xs)
    grid = np.array([g.samples[i, j] for i in (0, 3, 7) for j in (1, 5)])
    assert np.allclose(direct, grid, atol=1e-12)


def test_blocks_match_full_grid():
    g = synthesize(annulus_support(9, 0.6))
    full = np.array(g.samples)
    g2 = KernelGrid(g.support, g.N, g.oversampling)
    parts = np.concatenate([F for _, F in g2.iter_blocks(block=7)], axis=1)
    assert np.allclose(parts, full, atol=1e-10)


def test_grid_size_rule():
    assert grid_size(5, 4.0) == 64
    assert grid_size(0, 4.0) == 8
    with pytest.raises(ArgumentError):
        grid_size(5, 1.0)


def test_sample_cap():
    with pytest.raises(CapacityError):
        synthesize(annulus_support(100, 0.5), sample_cap=1000)


def test_knapp_cap_is_vertical_line():
    sup = knapp_support(AnnulusSpec.from_alpha(1024, 1 / 3))
    pts = sup.points.points
    assert len(pts) == 11
    assert set(pts[:, 0]) == {1024}
    assert pts[:, 1].tolist() == list(range(11))


def test_grid_file_roundtrip(tmp_path):
    g = synthesize(annulus_support(5, 0.5))
    path = tmp_path / "g.bin"
    write_grid(g, path)
    back = read_grid(path)
    assert back.shape == (g.N, g.N)
    assert np.array_equal(back, g.samples)
    assert path.read_bytes()[:8] == b"ANLGRID1"


def test_even_p_quadrature_matches_energy():
    # E_2 of the 12-point circle is 396
    g = synthesize(annulus_support(5, 0.01))
    r = lp_norm(g, 4)
    assert abs(r.power - 396) <= r.power_error


def test_ratio_translation_invariant():
    sup = FourierSupport(LatticeSet.from_points([(0, 0), (1, 0), (3, 2), (4, 4)]))
    a = ratio_2_to_p(sup, 6)
    b = ratio_2_to_p(sup.translated((100, -40)), 6)
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(-12, 12), st.integers(-12, 12)), min_size=1, max_size=20,
                unique=True),
       st.integers(0, 2**32 - 1))
def test_property_parseval(points, seed):
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=len(points)) + 1j * rng.normal(size=len(points))
    sup = FourierSupport.from_points(points, coef)
    r = lp_norm(synthesize(sup), 2)
    assert r.value == pytest.approx(sup.l2, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(-8, 8), st.integers(-8, 8)), min_size=1, max_size=12,
                unique=True))
def test_property_norms_monotone_in_p(points):
    g = synthesize(FourierSupport.from_points(points))
    v = [lp_norm(g, p).value for p in (2, 4, 6, math.inf)]
    assert all(a <= b * (1 + 1e-9) for a, b in zip(v, v[1:]))
    assert v[-1] == pytest.approx(len(points), rel=1e-9)

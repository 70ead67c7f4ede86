import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annulus_lab.caps import (C0_CONSTANT, census, classify_cap, eta_regime_census,
                              partition, sector_indices)
from annulus_lab.errors import ArgumentError
from annulus_lab.lattice import AnnulusSpec, LatticeSet, enumerate_annulus


def test_partition_frozen():
    spec = AnnulusSpec(5, 0.5)
    part = partition(enumerate_annulus(spec))
    assert part.n_caps == 20
    assert part.total_points == 28


def test_two_point_cap_direction():
    cap = classify_cap(0, (0.6, 0.7), [(3, 4), (4, 3)])
    assert cap.collinear and cap.equal_spacing
    assert cap.direction == (1, -1)
    assert cap.m_class == 0


def test_three_point_cap_not_collinear():
    cap = classify_cap(0, (0.0, 1.6), [(0, 5), (3, 4), (4, 3)])
    assert not cap.collinear
    assert cap.m_class is None


def test_unequal_spacing_detected():
    cap = classify_cap(0, (0.0, 0.1), [(10, 0), (10, 1), (10, 3)])
    assert cap.collinear and not cap.equal_spacing
    assert cap.m_class == 0


def test_twelve_point_circle_one_point_per_cap():
    part = partition(enumerate_annulus(AnnulusSpec(5, 0.01)))
    assert all(c.count == 1 for c in part.caps)


def test_boundary_goes_to_lower_sector():
    # with 4 sectors (0, 1) sits on the boundary between sectors 0 and 1;
    # angle 0 itself is placed in sector 0
    idx = sector_indices(np.array([[0, 1], [1, 0], [-1, 0], [0, -1], [1, 1]]), 4)
    assert idx.tolist() == [0, 0, 1, 2, 0]


def test_census_frozen_ratios():
    spec = AnnulusSpec(1000, 0.05)
    cen = census(partition(enumerate_annulus(spec)))
    assert math.isfinite(cen.max_ratio_s)
    assert cen.max_ratio_s == pytest.approx(2.56, abs=0.01)
    assert cen.max_ratio_sm == pytest.approx(4.53, abs=0.01)
    assert cen.total_points == len(enumerate_annulus(spec))
    assert cen.c0_threshold == pytest.approx(C0_CONSTANT * (math.sqrt(1000) * 0.05**1.5 + 1))


def test_census_csv_header():
    cen = census(partition(enumerate_annulus(AnnulusSpec(100, 0.3))))
    assert cen.to_csv().splitlines()[0] == "scale,s,m,regime,count,ratio"


def test_eta_census_in_regime():
    spec = AnnulusSpec.from_alpha(4096, 1 / 3)
    eta = eta_regime_census(spec)
    assert eta.lines_forced
    assert eta.counts[0] == 0
    assert eta.total_points == 3300
    assert eta.points[1] >= 0.5 * spec.lam * spec.delta


def test_cap_length_too_large():
    spec = AnnulusSpec(5, 0.5)
    with pytest.raises(ArgumentError):
        partition(enumerate_annulus(spec), cap_length=100.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(20, 400), st.floats(0.2, 0.9))
def test_property_partition_is_a_partition(lam, alpha):
    spec = AnnulusSpec.from_alpha(lam, alpha)
    lset = enumerate_annulus(spec)
    part = partition(lset)
    seen = []
    for c in part.caps:
        seen.extend(map(tuple, c.points))
    assert sorted(seen) == [tuple(p) for p in lset]
    assert len(set(c.index for c in part.caps)) == len(part.caps)


@settings(max_examples=30, deadline=None)
@given(st.floats(50, 2048), st.floats(0.5, 0.95))
def test_property_forced_caps_are_lines(lam, alpha):
    spec = AnnulusSpec.from_alpha(lam, alpha)
    eta = eta_regime_census(spec)
    if eta.lines_forced:
        assert eta.counts[0] == 0

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annulus_lab.analysis import (RegimePoint, Rectangle, Segment, SweepConfig, SweepRow,
                                  envelope, envelope_terms, fit_loglog, fit_slope,
                                  geometric_grid, propagate, region_consistency,
                                  regime_boundary, regions_to_json, run_sweep, side_of_curve,
                                  status, sweep_csv)
from annulus_lab.errors import ArgumentError


def test_envelope_frozen():
    assert envelope("B", 2, 100, 0.1) == pytest.approx(0.1 + math.sqrt(10))
    assert envelope("A", math.inf, 100, 0.01) == pytest.approx(10 * 0.1 + 1.0)
    with pytest.raises(ArgumentError):
        envelope("A", 1.5, 100, 0.1)
    with pytest.raises(ArgumentError):
        envelope("B", 4, 100, 1.5)


def test_red_curves():
    assert regime_boundary("A", 6) == 0
    assert regime_boundary("A", 8) == pytest.approx(0.2)
    assert regime_boundary("B", 6) == pytest.approx(1 / 3)
    assert regime_boundary("A", math.inf) == 1


@pytest.mark.parametrize("which", ["A", "B"])
@pytest.mark.parametrize("p", [4, 6, 8, 10, 14, 30])
def test_terms_balance_on_red_curve(which, p):
    lam = 1e5
    a = regime_boundary(which, p)
    t1, t2 = envelope_terms(which, p, lam, lam**-a)
    assert t1 == pytest.approx(t2, rel=1e-12)


def test_status_frozen():
    assert status("A", RegimePoint(12, 0.2)).status == "proved-with-eps"
    assert status("A", RegimePoint(4, 0.9)).status == "proved"
    assert status("A", RegimePoint(12, 0.5)).status == "open"
    assert status("A", RegimePoint(math.inf, 0.7)).status == "proved-with-eps"
    assert status("B", RegimePoint(8, 0.5)).status == "open"
    assert status("B", RegimePoint(5, 0.95)).status == "proved-with-eps"
    assert status("A", RegimePoint(4, 1.0)).status == "open"


def test_boundary_values():
    want = {("A", 6, 0): "proved-with-eps", ("A", 6, 1 / 3): "proved-with-eps",
            ("A", 10, 0): "proved", ("A", 10, 1 / 3): "proved-with-eps",
            ("B", 6, 0): "proved-with-eps", ("B", 6, 1 / 3): "proved-with-eps",
            ("B", 10, 0): "proved-with-eps", ("B", 10, 1 / 3): "open"}
    for (w, p, a), s in want.items():
        assert status(w, RegimePoint(p, a)).status == s


def test_propagate_shapes():
    (r,) = propagate([("A", RegimePoint(10, 0.1), "below")])
    assert isinstance(r, Rectangle) and r.contains(20, 0.05) and not r.contains(8, 0.05)
    (s,) = propagate([("A", RegimePoint(10, 0.5), "above")])
    assert isinstance(s, Segment) and s.contains(3, 0.5) and not s.contains(12, 0.5)
    with pytest.raises(ArgumentError):
        propagate([("A", RegimePoint(10, 0.1), "above")])
    doc = json.loads(regions_to_json([r, s]))
    assert [d["kind"] for d in doc] == ["rectangle", "segment"]


def test_on_curve_counts_as_above():
    assert side_of_curve("A", 10, 1 / 3) == "above"
    assert side_of_curve("B", 8, 0.5) == "above"
    assert side_of_curve("B", 8, 0.49) == "below"


def test_fit_slope_exact_power():
    xs = [2.0**k for k in range(3, 9)]
    f = fit_slope(xs, [3 * x**1.5 for x in xs])
    assert f.slope == pytest.approx(1.5, abs=1e-12)
    assert f.intercept == pytest.approx(math.log(3), abs=1e-12)
    assert f.residual_rms < 1e-12


def test_fit_loglog_needs_three_rows():
    rows = [SweepRow(128.0, 0.1, 2, "point-count", 10.0), SweepRow(256.0, 0.1, 2, "point-count", 20.0)]
    with pytest.raises(ArgumentError):
        fit_loglog(rows)
    with pytest.raises(ArgumentError):
        fit_loglog(rows + [SweepRow(512.0, 0.1, 2, "point-count", -1.0)])


def test_sweep_point_count_slope():
    rows = run_sweep(SweepConfig("point-count", 1 / 3, geometric_grid(128, 4096)))
    assert [r.lam for r in rows] == [128.0 * 2**k for k in range(6)]
    assert fit_loglog(rows).slope == pytest.approx(2 / 3, abs=0.15)


def test_sweep_deterministic_across_workers(monkeypatch):
    cfg = SweepConfig("knapp-ratio", 0.3, geometric_grid(128, 1024), p=6)
    monkeypatch.setenv("ANNULUS_LAB_THREADS", "1")
    a = sweep_csv(run_sweep(cfg))
    monkeypatch.setenv("ANNULUS_LAB_THREADS", "3")
    b = sweep_csv(run_sweep(cfg))
    assert a == b
    assert a.splitlines()[0] == "lambda,delta,p,quantity,value,method,error"


def test_sweep_capacity_annotates_row(monkeypatch):
    import annulus_lab.kernel as kernel

    monkeypatch.setattr(kernel, "SAMPLE_CAP", 10)
    monkeypatch.setattr(kernel.synthesize, "__defaults__", (4.0, 10))
    rows = run_sweep(SweepConfig("kernel-Lp", 0.3, [64.0], p=4))
    assert rows[0].value is None and rows[0].error.startswith("capacity")


def test_unknown_quantity():
    with pytest.raises(ArgumentError):
        run_sweep(SweepConfig("bogus", 0.3, [64.0]))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["A", "B"]), st.floats(2, 200), st.floats(0, 0.999))
def test_property_region_monotone(which, p, alpha):
    # the region generated by a non-open point never contains a weaker point
    pt = RegimePoint(p, alpha)
    s0 = status(which, pt).status
    if s0 == "open":
        return
    (reg,) = propagate([(which, pt, side_of_curve(which, p, alpha))])
    rank = {"open": 0, "proved-with-eps": 1, "proved": 2}
    probes = [(q, b) for q in (2, 3, 5, 6, 8, 10, 12, 20, 50, 200, p, math.inf)
              for b in (0, alpha / 2, alpha, min(alpha * 1.5, 0.999))]
    for q, b in probes:
        if q >= 2 and reg.contains(q, b):
            assert rank[status(which, RegimePoint(q, b)).status] >= rank[s0]


def test_grid_consistency():
    ts = np.linspace(0, 0.5, 40)
    ps = [math.inf if t == 0 else 1 / t for t in ts]
    als = list(np.linspace(0, 1, 40))
    assert region_consistency("A", ps, als) == []
    assert region_consistency("B", ps, als) == []

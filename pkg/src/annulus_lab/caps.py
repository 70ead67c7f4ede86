"""Angular cap decompositions of annular lattice sets.

A cap is a half-open angular sector ``(k*w, (k+1)*w]`` of width
``w = 2*pi/n_caps``; a point lying exactly on a boundary therefore joins the
lower-index sector, and angle 0 belongs to sector 0.  All geometric
predicates on the points of a cap (collinearity, spacing, directions) use
exact integer arithmetic.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .errors import ArgumentError, IntegrityError
from .lattice import AnnulusSpec, LatticeSet, enumerate_annulus

C0_CONSTANT = 4.0
REGIME_FACTOR = 10.0
_BOUNDARY_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Cap:
    index: int
    angular_range: Tuple[float, float]
    points: np.ndarray
    count: int
    s_class: Optional[int]
    collinear: bool
    equal_spacing: bool
    m_class: Optional[int] = None
    direction: Optional[Tuple[int, int]] = None
    alpha: Optional[float] = None

    @property
    def center(self) -> float:
        return 0.5 * (self.angular_range[0] + self.angular_range[1])


def _spec_of(lset: LatticeSet, spec: Optional[AnnulusSpec]) -> AnnulusSpec:
    if spec is not None:
        return spec
    src = lset.source
    if isinstance(src, AnnulusSpec):
        return src
    if isinstance(src, tuple) and src[0].kind == "unit-circle":
        return AnnulusSpec(src[1], src[2])
    raise ArgumentError("cap partitions need an annulus source; pass spec explicitly")


def sector_indices(points: np.ndarray, n_caps: int) -> np.ndarray:
    """Cap index of each point under the half-open sector convention."""
    if len(points) == 0:
        return np.zeros(0, dtype=np.int64)
    theta = np.arctan2(points[:, 1].astype(float), points[:, 0].astype(float))
    theta = np.mod(theta, 2 * math.pi)
    q = theta * (n_caps / (2 * math.pi))
    # snap near-integers so that boundary points join the lower sector
    r = np.rint(q)
    q = np.where(np.abs(q - r) <= _BOUNDARY_EPS * np.maximum(1.0, r), r, q)
    idx = np.ceil(q).astype(np.int64) - 1
    idx = np.where(idx < 0, 0, idx)
    idx[idx >= n_caps] = 0  # theta snapped to 2*pi is angle 0
    return idx


def _primitive(v) -> Tuple[int, int]:
    a, b = int(v[0]), int(v[1])
    g = math.gcd(a, b)
    a, b = a // g, b // g
    if a < 0 or (a == 0 and b < 0):
        a, b = -a, -b
    return a, b


def classify_cap(index: int, angular_range: Tuple[float, float], points) -> Cap:
    """Classify the points of one cap.

    ``points`` are reordered along the tangent at the cap centre before the
    exact collinearity and spacing tests.
    """
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return Cap(index, angular_range, pts, 0, None, True, True)
    phi = 0.5 * (angular_range[0] + angular_range[1])
    tx, ty = -math.sin(phi), math.cos(phi)
    if n > 1:
        order = np.argsort(pts[:, 0] * tx + pts[:, 1] * ty, kind="stable")
        pts = pts[order]
    pts.setflags(write=False)
    s_class = n.bit_length() - 1
    if n == 1:
        return Cap(index, angular_range, pts, 1, 0, True, True)

    diffs = [(int(a), int(b)) for a, b in np.diff(pts, axis=0).tolist()]
    d0 = diffs[0]
    collinear = all(d0[0] * d[1] - d0[1] * d[0] == 0 for d in diffs[1:])
    if collinear and n > 2:
        # collinear consecutive differences must also point the same way
        collinear = all(d0[0] * d[0] + d0[1] * d[1] > 0 for d in diffs[1:])
    equal = collinear and all(d == d0 for d in diffs)
    if not collinear:
        return Cap(index, angular_range, pts, n, s_class, False, False)
    gap2 = min(d[0] * d[0] + d[1] * d[1] for d in diffs)
    m_class = (gap2.bit_length() - 1) // 2
    dx, dy = _primitive(d0)
    cross = abs(dx * ty - dy * tx)
    dot = abs(dx * tx + dy * ty)
    alpha = math.atan2(cross, dot)
    return Cap(index, angular_range, pts, n, s_class, True, equal, m_class, (dx, dy), alpha)


@dataclass(frozen=True, eq=False)
class CapPartition:
    """Cover of an annular lattice set by ``n_caps`` equal angular sectors.

    Only nonempty caps are materialised in ``caps`` (sorted by index); use
    :meth:`cap` or :meth:`all_caps` to see empty ones.
    """

    spec: AnnulusSpec
    cap_length: float
    n_caps: int
    caps: Tuple[Cap, ...]
    assignment: np.ndarray = field(repr=False)

    @property
    def width(self) -> float:
        return 2 * math.pi / self.n_caps

    @property
    def implied_beta(self) -> float:
        """``beta`` with ``cap_length = lam * (delta/lam)**beta``."""
        lam, delta = self.spec.lam, self.spec.delta
        return math.log(self.cap_length / lam) / math.log(delta / lam)

    @property
    def total_points(self) -> int:
        return sum(c.count for c in self.caps)

    def cap(self, k: int) -> Cap:
        i = np.searchsorted(self._indices, k)
        if i < len(self.caps) and self.caps[i].index == k:
            return self.caps[i]
        w = self.width
        return classify_cap(k, (k * w, (k + 1) * w), [])

    def all_caps(self) -> Iterator[Cap]:
        for k in range(self.n_caps):
            yield self.cap(k)

    @property
    def _indices(self) -> np.ndarray:
        return np.fromiter((c.index for c in self.caps), dtype=np.int64, count=len(self.caps))


def partition(lset: LatticeSet, cap_length: Optional[float] = None,
              spec: Optional[AnnulusSpec] = None) -> CapPartition:
    """Split ``lset`` into caps of arc length about ``cap_length``.

    The default length is the canonical ``(lam*delta)**0.5``.
    """
    spec = _spec_of(lset, spec)
    lam = spec.lam
    ell = math.sqrt(lam * spec.delta) if cap_length is None else float(cap_length)
    if not ell > 0:
        raise ArgumentError("cap length must be positive")
    if ell > 2 * math.pi * lam:
        raise ArgumentError(f"cap length {ell} exceeds the circumference 2*pi*lambda")
    n_caps = math.ceil(2 * math.pi * lam / ell)
    w = 2 * math.pi / n_caps
    pts = lset.points
    idx = sector_indices(pts, n_caps)
    caps = []
    if len(pts):
        order = np.argsort(idx, kind="stable")
        sidx = idx[order]
        cuts = np.flatnonzero(np.diff(sidx)) + 1
        for group in np.split(order, cuts):
            k = int(idx[group[0]])
            caps.append(classify_cap(k, (k * w, (k + 1) * w), pts[group]))
    idx.setflags(write=False)
    return CapPartition(spec, ell, n_caps, tuple(caps), idx)


@dataclass
class CapCensus:
    """(s, m)-census of a partition with calibration-relative ratios."""

    lam: float
    delta: float
    scale: float
    c0_constant: float
    c0_threshold: float
    c0_caps: int
    c0_points: int
    class_counts: Dict[int, int]
    class_points: Dict[int, int]
    sm_counts: Dict[Tuple[int, int], int]
    ratio_s: Dict[int, float]
    ratio_sm: Dict[Tuple[int, int], float]

    @property
    def total_points(self) -> int:
        return self.c0_points + sum(self.class_points.values())

    @property
    def max_ratio_s(self) -> float:
        return max(self.ratio_s.values(), default=0.0)

    @property
    def max_ratio_sm(self) -> float:
        return max(self.ratio_sm.values(), default=0.0)

    def rows(self) -> List[tuple]:
        """Rows ``(scale, s, m, regime, count, ratio)``."""
        out = [(self.scale, "", "", "C0", self.c0_caps, "")]
        for s in sorted(self.class_counts):
            out.append((self.scale, s, "", "Cs", self.class_counts[s], self.ratio_s[s]))
        for (s, m) in sorted(self.sm_counts):
            out.append((self.scale, s, m, "Ssm", self.sm_counts[(s, m)], self.ratio_sm[(s, m)]))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "s", "m", "regime", "count", "ratio"])
        for r in self.rows():
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
        return buf.getvalue()

    def to_json(self) -> str:
        keys = ["scale", "s", "m", "regime", "count", "ratio"]
        return json.dumps([dict(zip(keys, r)) for r in self.rows()], sort_keys=True)


def census(part: CapPartition, c0_constant: float = C0_CONSTANT) -> CapCensus:
    lam, delta = part.spec.lam, part.spec.delta
    threshold = c0_constant * (math.sqrt(lam) * delta**1.5 + 1)
    c0_caps = c0_points = 0
    cc, cp, sm = Counter(), Counter(), Counter()
    for cap in part.caps:
        if cap.count <= threshold:
            c0_caps += 1
            c0_points += cap.count
            continue
        cc[cap.s_class] += 1
        cp[cap.s_class] += cap.count
        if cap.collinear and cap.m_class is not None:
            sm[(cap.s_class, cap.m_class)] += 1
    ld = lam * delta
    ratio_s = {s: c * 4.0**s / ld for s, c in cc.items()}
    ratio_sm = {k: c * 2.0 ** (k[0] - k[1]) / math.sqrt(ld) for k, c in sm.items()}
    return CapCensus(lam, delta, part.cap_length, c0_constant, threshold, c0_caps, c0_points,
                     dict(cc), dict(cp), dict(sm), ratio_s, ratio_sm)


# ---------------------------------------------------------------------------
# Small-cap regimes
# ---------------------------------------------------------------------------


@dataclass
class EtaCensus:
    """Regime counts for the ``(1/(100 delta), delta)`` caps.

    Regime 1 holds caps with a single point, regimes 2 to 4 split the caps
    with at least two points by the angle between their line and the tangent.
    """

    spec: AnnulusSpec
    scale: float
    factor: float
    ecc_eta: float
    ecc_tau: float
    in_regime: bool
    lines_forced: bool
    counts: Dict[int, int]
    points: Dict[int, int]
    rows: List[Tuple[int, int, int, float, int]]

    @property
    def total_points(self) -> int:
        return sum(self.points.values())


def _lines_forced(spec: AnnulusSpec, n_caps: int) -> bool:
    """True when any lattice triangle in one sector would be too large.

    A triangle inside a convex set has at most half the area of a bounding
    rectangle, and a nondegenerate lattice triangle has area >= 1/2.
    """
    half = math.pi / n_caps
    r1, r2 = spec.lam - spec.delta, spec.lam + spec.delta
    rect = 2 * r2 * math.sin(half) * (r2 - r1 * math.cos(half))
    return rect < 1.0


def eta_regime_census(spec: AnnulusSpec, factor: float = REGIME_FACTOR,
                      lset: Optional[LatticeSet] = None) -> EtaCensus:
    lam, delta = spec.lam, spec.delta
    ell = 1.0 / (100.0 * delta)
    if ell > 2 * math.pi * lam:
        raise ArgumentError("1/(100*delta) exceeds the circumference 2*pi*lambda")
    if lset is None:
        lset = enumerate_annulus(spec)
    part = partition(lset, ell, spec)
    ecc_eta = 100.0 * delta * delta
    ecc_tau = math.sqrt(delta / lam)
    forced = _lines_forced(spec, part.n_caps)
    # key 0 collects multi-point caps that are not on a line (only possible
    # when the sector is too fat for the area argument)
    counts = {0: 0, 1: 0, 2: 0, 3: 0, 4: 0}
    npts = {0: 0, 1: 0, 2: 0, 3: 0, 4: 0}
    rows = []
    for cap in part.caps:
        if cap.count == 1:
            counts[1] += 1
            npts[1] += 1
            continue
        if not (cap.collinear and cap.equal_spacing):
            if forced:
                raise IntegrityError(
                    f"cap {cap.index} holds non-collinear or unequally spaced points "
                    f"{cap.points.tolist()} although its area forces a line")
            counts[0] += 1
            npts[0] += cap.count
            continue
        if cap.alpha > factor * ecc_eta:
            case = 2
        elif cap.alpha < ecc_tau / factor:
            case = 4
        else:
            case = 3
        counts[case] += 1
        npts[case] += cap.count
        rows.append((cap.index, cap.s_class, cap.m_class, cap.alpha, case))
    return EtaCensus(spec, ell, factor, ecc_eta, ecc_tau, delta >= lam ** (-1 / 3),
                     forced, counts, npts, rows)

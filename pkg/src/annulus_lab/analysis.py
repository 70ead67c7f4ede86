"""Conjectured envelopes, the (p, alpha) region logic, sweeps and slope fits.

Points of the region diagrams are ``(p, alpha)`` with ``delta = lam**-alpha``.
Threshold comparisons are done in rational arithmetic: float inputs are
snapped to the nearest fraction with denominator at most 10**9, so ``1/3``
or ``0.2`` typed as floats land exactly on the curves they name, and a point
on a curve is classified the same way by every function here.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ArgumentError, CapacityError, LabError

INF = math.inf
Number = Union[int, float, Fraction]

PROVED = "proved"
PROVED_EPS = "proved-with-eps"
OPEN = "open"
_RANK = {OPEN: 0, PROVED_EPS: 1, PROVED: 2}


_DENOM = 10**9


@functools.lru_cache(maxsize=1 << 16)
def _q(x) -> Fraction:
    return Fraction(x).limit_denominator(_DENOM)


def _check_which(which: str) -> str:
    w = str(which).upper()
    if w not in ("A", "B"):
        raise ArgumentError(f"which must be 'A' or 'B', got {which!r}")
    return w


# ---------------------------------------------------------------------------
# Envelopes and red curves
# ---------------------------------------------------------------------------


def envelope(which: str, p: float, lam: float, delta: float) -> float:
    """Conjectured size of ``||P||_{2->p}`` (A) or ``||Phi||_p`` (B)."""
    w = _check_which(which)
    if not p >= 2:
        raise ArgumentError("p must be >= 2")
    if not lam > 2:
        raise ArgumentError("lambda must exceed 2")
    if not 0 < delta < 1:
        raise ArgumentError("delta must lie in (0, 1)")
    ip = 0.0 if p == INF else 1.0 / p
    if w == "A":
        return lam ** (0.5 - 2 * ip) * delta**0.5 + (lam * delta) ** (0.25 - 0.5 * ip)
    return lam ** (1 - 2 * ip) * delta + (lam * delta) ** 0.5


def envelope_terms(which: str, p: float, lam: float, delta: float) -> Tuple[float, float]:
    """The two summands of :func:`envelope` (spherical term first)."""
    w = _check_which(which)
    ip = 0.0 if p == INF else 1.0 / p
    if w == "A":
        return lam ** (0.5 - 2 * ip) * delta**0.5, (lam * delta) ** (0.25 - 0.5 * ip)
    return lam ** (1 - 2 * ip) * delta, (lam * delta) ** 0.5


@functools.lru_cache(maxsize=1 << 12)
def _red_exact(which: str, p) -> Fraction:
    if p == INF:
        return Fraction(1)
    p = _q(p)
    if which == "A":
        return 1 - Fraction(8) / (p + 2)
    return 1 - Fraction(4) / p


def regime_boundary(which: str, p: float) -> float:
    """Red curve ``alpha(p)``: ``1 - 8/(p+2)`` for A, ``1 - 4/p`` for B."""
    w = _check_which(which)
    if not p >= 2:
        raise ArgumentError("p must be >= 2")
    return float(_red_exact(w, p))


def side_of_curve(which: str, p: float, alpha: float) -> str:
    """``below`` when ``alpha`` is strictly under the red curve, else ``above``."""
    w = _check_which(which)
    return "below" if _q(alpha) < _red_exact(w, p) else "above"


# ---------------------------------------------------------------------------
# Status of a point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegimePoint:
    p: float
    alpha: float

    def __post_init__(self):
        if not (self.p >= 2):
            raise ArgumentError("p must be >= 2")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ArgumentError("alpha must be finite and >= 0")

    @classmethod
    def from_lambda_delta(cls, p: float, lam: float, delta: float) -> "RegimePoint":
        return cls(p, -math.log(delta) / math.log(lam))


@dataclass(frozen=True)
class RegionStatus:
    status: str
    source: str


@functools.lru_cache(maxsize=1 << 12)
def lossless_threshold(p) -> Fraction:
    """Largest ``alpha`` (exclusive) of the lossless range for ``p >= 6``.

    ``delta > min(lam^-a1, lam^(-a2+eps))`` is ``alpha < max(a1, a2)`` once
    the epsilon is treated as an open boundary.
    """
    if p == INF:
        return max(Fraction(1, 3), Fraction(10, 29))
    p = _q(p)
    a1 = (1 - 6 / p) / (3 - 2 / p)
    a2 = (10 - 64 / p) / (29 - 14 / p)
    return max(a1, a2)


def status(which: str, point: RegimePoint) -> RegionStatus:
    return _status(_check_which(which), float(point.p), float(point.alpha))


@functools.lru_cache(maxsize=1 << 16)
def _status(w: str, p: float, alpha: float) -> RegionStatus:
    a = _q(alpha)
    if a >= 1:
        return RegionStatus(OPEN, "outside the regime delta > 1/lambda")
    third = Fraction(1, 3)
    if w == "A":
        if p < 6:
            return RegionStatus(PROVED, "lossless: 2 <= p < 6")
        if a < lossless_threshold(p):
            return RegionStatus(PROVED, "lossless: p >= 6 above the delta threshold")
        if p <= 10:
            return RegionStatus(PROVED_EPS, "with eps loss: p <= 10")
        if a < third:
            return RegionStatus(PROVED_EPS, "with eps loss: delta > lambda^(-1/3)")
        if p == INF:
            return RegionStatus(PROVED_EPS, "with eps loss: p = infinity")
        return RegionStatus(OPEN, "open")
    if p <= 6:
        return RegionStatus(PROVED_EPS, "with eps loss: p <= 6")
    if a < third:
        return RegionStatus(PROVED_EPS, "with eps loss: delta > lambda^(-1/3)")
    return RegionStatus(OPEN, "open")


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rectangle:
    """``{(p, alpha): p >= p_min, 0 <= alpha <= alpha_max}``."""

    which: str
    p_min: float
    alpha_max: float
    level: str
    kind: str = "rectangle"

    def contains(self, p: float, alpha: float) -> bool:
        return p >= self.p_min and 0 <= _q(alpha) <= _q(self.alpha_max)


@dataclass(frozen=True)
class Segment:
    """``{(p, alpha): 2 <= p <= p_max, alpha = alpha0}``."""

    which: str
    p_max: float
    alpha: float
    level: str
    kind: str = "segment"

    def contains(self, p: float, alpha: float) -> bool:
        return 2 <= p <= self.p_max and _q(alpha) == _q(self.alpha)


Region = Union[Rectangle, Segment]


def propagate(verified: Sequence[Tuple[str, RegimePoint, str]],
              level: Optional[str] = None) -> List[Region]:
    """Regions implied by verified points.

    Each entry is ``(which, point, side)`` with ``side`` in
    ``{"below", "above"}``; it must agree with :func:`side_of_curve`.  A
    point below the red curve yields the rectangle with that point as its
    corner toward large ``p`` and large ``alpha``; a point above yields the
    segment toward ``p = 2`` at the same ``alpha``.  ``level`` is the status
    the regions inherit; by default the generator's own status.
    """
    out: List[Region] = []
    for which, pt, side in verified:
        w = _check_which(which)
        actual = side_of_curve(w, pt.p, pt.alpha)
        if side != actual:
            raise ArgumentError(f"point {pt} is {actual} the red curve of {w}, not {side}")
        lvl = level or status(w, pt).status
        if side == "below":
            out.append(Rectangle(w, pt.p, pt.alpha, lvl))
        else:
            out.append(Segment(w, pt.p, pt.alpha, lvl))
    return out


def regions_to_json(regions: Sequence[Region]) -> str:
    def enc(r):
        d = asdict(r)
        for k, v in d.items():
            if v == INF:
                d[k] = "inf"
        return d

    return json.dumps([enc(r) for r in regions], sort_keys=True)


def region_consistency(which: str, ps: Sequence[float], alphas: Sequence[float]) -> List[tuple]:
    """Violations of status monotonicity on a grid.

    Every non-open grid point generates its region at its own status level;
    any grid point inside that region with a lower status is a violation.
    Returns ``(generator, offender)`` pairs, one offender per generator
    (empty when consistent).  Membership is decided on grid indices, which
    is exact because both axes are sorted and duplicate-free.
    """
    w = _check_which(which)
    ps = sorted(set(ps))
    alphas = sorted(set(alphas))
    rank = np.array([[_RANK[status(w, RegimePoint(p, a)).status] for a in alphas]
                     for p in ps], dtype=np.int64)
    nP, nA = rank.shape
    flat = np.arange(nP * nA).reshape(nP, nA)
    # rectangle: min rank over p >= p_i and alpha <= alpha_j
    key = rank * (nP * nA) + flat
    rect = np.minimum.accumulate(key, axis=1)
    rect = np.minimum.accumulate(rect[::-1], axis=0)[::-1]
    # segment: min rank over p <= p_i at alpha_j
    seg = np.minimum.accumulate(key, axis=0)
    bad = []
    for i, p0 in enumerate(ps):
        for j, a0 in enumerate(alphas):
            s0 = rank[i, j]
            if s0 == 0:
                continue
            table = rect if side_of_curve(w, p0, a0) == "below" else seg
            k = int(table[i, j])
            r, idx = divmod(k, nP * nA)
            if r < s0:
                oi, oj = divmod(idx, nA)
                names = {v: k_ for k_, v in _RANK.items()}
                bad.append(((p0, a0, names[s0]), (ps[oi], alphas[oj], names[r])))
    return bad


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------


@dataclass
class FitResult:
    slope: float
    intercept: float
    residual_rms: float
    n_points: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """Least-squares line through ``(ln x, ln y)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise ArgumentError("need at least two (x, y) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ArgumentError("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + icpt)
    return FitResult(float(slope), float(icpt), float(np.sqrt(np.mean(res**2))), len(x))


def fit_loglog(rows: Sequence["SweepRow"]) -> FitResult:
    good = [r for r in rows if r.value is not None]
    if len(good) < 3:
        raise ArgumentError("a fit needs at least three rows with values")
    if any(r.value <= 0 for r in good):
        raise ArgumentError("log-log fit needs positive values")
    return fit_slope([r.lam for r in good], [r.value for r in good])


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

QUANTITIES = ("kernel-Lp", "energy", "knapp-ratio", "spherical-ratio", "point-count")


@dataclass
class SweepRow:
    lam: float
    delta: float
    p: float
    quantity: str
    value: Optional[float]
    method: str = ""
    error: str = ""

    def csv_fields(self) -> list:
        v = "" if self.value is None else repr(float(self.value))
        p = "inf" if self.p == INF else repr(float(self.p))
        return [repr(float(self.lam)), repr(float(self.delta)), p, self.quantity, v,
                self.method, self.error]


@dataclass
class SweepConfig:
    quantity: str
    alpha: float
    lambdas: Sequence[float]
    p: float = 4.0
    m: int = 3
    oversampling: float = 4.0
    seed: int = 0


def geometric_grid(lmin: float, lmax: float, factor: float = 2.0) -> List[float]:
    out, lam = [], float(lmin)
    while lam <= lmax * (1 + 1e-12):
        out.append(lam)
        lam *= factor
    return out


def worker_count() -> int:
    raw = os.environ.get("ANNULUS_LAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _sweep_value(cfg: SweepConfig, lam: float) -> SweepRow:
    from .energy import additive_energy
    from .kernel import (FourierSupport, knapp_support, lp_norm, ratio_2_to_p,
                         synthesize)
    from .lattice import AnnulusSpec, count_annulus, enumerate_annulus

    spec = AnnulusSpec.from_alpha(lam, cfg.alpha)
    q = cfg.quantity
    row = SweepRow(lam, spec.delta, cfg.p, q, None)
    try:
        if q == "point-count":
            row.value, row.method = float(len(enumerate_annulus(spec))), "enumerate"
        elif q == "energy":
            rep = additive_energy(enumerate_annulus(spec), cfg.m)
            row.value, row.method = float(rep.energy), rep.method
            row.p = 2.0 * cfg.m
        elif q == "kernel-Lp":
            sup = FourierSupport(enumerate_annulus(spec))
            if sup.empty:
                row.error = "empty support"
            else:
                nr = lp_norm(synthesize(sup, cfg.oversampling), cfg.p)
                row.value, row.method = nr.value, nr.method
                row.error = repr(float(nr.error_estimate))
        elif q == "knapp-ratio":
            sup = knapp_support(spec)
            if sup.empty:
                row.error = "empty cap"
            else:
                row.value, row.method = ratio_2_to_p(sup, cfg.p, cfg.oversampling), "grid-quadrature"
        elif q == "spherical-ratio":
            sup = FourierSupport(enumerate_annulus(spec))
            if sup.empty:
                row.error = "empty support"
            else:
                row.value, row.method = ratio_2_to_p(sup, cfg.p, cfg.oversampling), "grid-quadrature"
        else:
            raise ArgumentError(f"unknown quantity {q!r}")
    except CapacityError as exc:
        row.value, row.error = None, f"capacity: {exc}"
    return row


def run_sweep(cfg: SweepConfig, workers: Optional[int] = None) -> List[SweepRow]:
    """Evaluate ``cfg.quantity`` at every lambda; rows come back in lambda order."""
    if cfg.quantity not in QUANTITIES:
        raise ArgumentError(f"quantity must be one of {QUANTITIES}")
    lams = sorted(float(l) for l in cfg.lambdas)
    n = workers or worker_count()
    if n == 1 or len(lams) <= 1:
        return [_sweep_value(cfg, lam) for lam in lams]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda lam: _sweep_value(cfg, lam), lams))


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "delta", "p", "quantity", "value", "method", "error"])
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()

"""Integer points in thin annuli and in metric neighbourhoods of dilated curves.

Membership in an annulus is decided on squared norms in exact arithmetic:
the float radii are converted to :class:`fractions.Fraction` (exactly the
binary value of the float), so ``(lam - delta)**2 < x*x + y*y < (lam + delta)**2``
is never subject to rounding at the boundary.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ArgumentError, CapacityError, InputRangeError, NumericalError

COORD_LIMIT = 2**31
R2_LIMIT = 2**62
DEFAULT_POINT_CAP = 10**7


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnulusSpec:
    """Open annulus ``lam - delta < |k| < lam + delta``."""

    lam: float
    delta: float

    def __post_init__(self):
        lam, delta = float(self.lam), float(self.delta)
        if not (math.isfinite(lam) and math.isfinite(delta)):
            raise ArgumentError("lambda and delta must be finite")
        if lam <= 2:
            raise ArgumentError(f"lambda must exceed 2, got {lam}")
        if not 0 < delta < lam:
            raise ArgumentError(f"delta must lie in (0, lambda), got {delta}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "delta", delta)

    @classmethod
    def from_alpha(cls, lam: float, alpha: float) -> "AnnulusSpec":
        return cls(lam, float(lam) ** (-float(alpha)))

    @property
    def alpha(self) -> float:
        return -math.log(self.delta) / math.log(self.lam)

    def norm_window(self) -> Tuple[int, int]:
        """Inclusive integer range ``[n_lo, n_hi]`` of admissible ``|k|^2``.

        The range is empty when ``n_lo > n_hi``.
        """
        lam, delta = Fraction(self.lam), Fraction(self.delta)
        inner, outer = (lam - delta) ** 2, (lam + delta) ** 2
        # n > inner  <=>  n >= floor(inner) + 1 ;  n < outer  <=>  n <= ceil(outer) - 1
        return math.floor(inner) + 1, math.ceil(outer) - 1

    def predicted_count(self) -> float:
        return 4.0 * math.pi * self.lam * self.delta


CURVE_KINDS = ("unit-circle", "ellipse", "parabola")


@dataclass(frozen=True)
class CurveSpec:
    """A compact curve of one of three supported kinds.

    ``domain`` is the parameter interval.  For the circle and the ellipse it
    is the full period ``[0, 2*pi]``; for the parabola ``xi -> (xi, xi**2)``
    it defaults to ``[-1, 1]``.
    """

    kind: str
    a: float = 1.0
    b: float = 1.0
    domain: Tuple[float, float] = (0.0, 2 * math.pi)

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ArgumentError(f"unknown curve kind {self.kind!r}")
        if self.kind == "ellipse" and not (self.a > 0 and self.b > 0):
            raise ArgumentError("ellipse semi-axes must be positive")
        lo, hi = map(float, self.domain)
        if not lo < hi:
            raise ArgumentError("parameter domain must be a nonempty interval")
        if self.kind != "parabola" and (lo, hi) != (0.0, 2 * math.pi):
            raise ArgumentError("only the full closed curve is supported for circle/ellipse")
        object.__setattr__(self, "domain", (lo, hi))

    @classmethod
    def circle(cls) -> "CurveSpec":
        return cls("unit-circle")

    @classmethod
    def ellipse(cls, a: float, b: float) -> "CurveSpec":
        return cls("ellipse", float(a), float(b))

    @classmethod
    def parabola(cls, domain: Tuple[float, float] = (-1.0, 1.0)) -> "CurveSpec":
        return cls("parabola", domain=domain)


Source = Union[AnnulusSpec, Tuple[CurveSpec, float, float], None]


# ---------------------------------------------------------------------------
# LatticeSet
# ---------------------------------------------------------------------------


def _as_point_array(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ArgumentError("points must have shape (n, 2)")
    if np.abs(arr).max() > COORD_LIMIT:
        raise InputRangeError("lattice coordinates exceed the 2**31 guard")
    return arr


@dataclass(frozen=True, eq=False)
class LatticeSet:
    """Immutable, lexicographically sorted set of integer points."""

    points: np.ndarray
    source: Source = field(default=None, repr=False)

    def __post_init__(self):
        arr = _as_point_array(self.points)
        if len(arr) > 1:
            d = np.diff(arr, axis=0)
            ok = (d[:, 0] > 0) | ((d[:, 0] == 0) & (d[:, 1] > 0))
            if not ok.all():
                raise ArgumentError("points must be strictly lexicographically increasing")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @classmethod
    def from_points(cls, points, source: Source = None) -> "LatticeSet":
        """Sort and deduplicate arbitrary integer points."""
        arr = _as_point_array(points)
        if len(arr):
            arr = np.unique(arr, axis=0)
        return cls(arr, source)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        for x, y in self.points.tolist():
            yield (x, y)

    def __contains__(self, item) -> bool:
        x, y = item
        i = np.searchsorted(self.points[:, 0], x, side="left")
        j = np.searchsorted(self.points[:, 0], x, side="right")
        return bool(np.any(self.points[i:j, 1] == y))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatticeSet):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        return f"LatticeSet(n={len(self)}, source={self.source!r})"

    @property
    def max_coord(self) -> int:
        return int(np.abs(self.points).max()) if len(self) else 0

    def as_set(self) -> set:
        return set(self)

    # serialization -------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y"])
        w.writerows(self.points.tolist())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LatticeSet":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
            raise ArgumentError("lattice CSV must start with header 'x,y'")
        return cls.from_points([(int(r[0]), int(r[1])) for r in rows[1:] if r])

    def to_json(self) -> str:
        return json.dumps(self.points.tolist(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "LatticeSet":
        return cls.from_points(json.loads(text))


# ---------------------------------------------------------------------------
# Sums of two squares
# ---------------------------------------------------------------------------


def factorize(n: int) -> dict:
    """Trial-division factorization of a positive integer."""
    if n < 1:
        raise InputRangeError("factorize needs a positive integer")
    out = {}
    for p in (2, 3):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    p, step = 5, 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += step
        step = 6 - step
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _check_r2_arg(n) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise InputRangeError("r2 needs an integer")
    n = int(n)
    if n < 0 or n > R2_LIMIT:
        raise InputRangeError(f"r2 argument must lie in [0, 2**62], got {n}")
    return n


def r2(n: int) -> int:
    """Number of ``(x, y)`` in Z^2 with ``x*x + y*y == n``.

    Uses ``r2(n) = 4 * (d1(n) - d3(n))`` in its multiplicative form.
    """
    n = _check_r2_arg(n)
    if n == 0:
        return 1
    count = 4
    for p, e in factorize(n).items():
        if p % 4 == 1:
            count *= e + 1
        elif p % 4 == 3 and e % 2:
            return 0
    return count


def _prime_as_two_squares(p: int) -> Tuple[int, int]:
    """Write a prime ``p = 1 mod 4`` as ``a*a + b*b`` (Hermite-Serret)."""
    c = 2
    while pow(c, (p - 1) // 2, p) != p - 1:
        c += 1
    t = pow(c, (p - 1) // 4, p)
    a, b = p, t
    while b * b > p:
        a, b = b, a % b
    x = b
    y = math.isqrt(p - x * x)
    assert x * x + y * y == p
    return x, y


def _gmul(u, v):
    return (u[0] * v[0] - u[1] * v[1], u[0] * v[1] + u[1] * v[0])


def _gpow(u, e):
    out = (1, 0)
    for _ in range(e):
        out = _gmul(out, u)
    return out


def two_square_reps(n: int) -> list:
    """All ``(x, y)`` with ``x*x + y*y == n`` via Gaussian-integer factorization."""
    n = _check_r2_arg(n)
    if n == 0:
        return [(0, 0)]
    partial = [(1, 0)]
    for p, e in sorted(factorize(n).items()):
        if p == 2:
            f = _gpow((1, 1), e)
            partial = [_gmul(z, f) for z in partial]
        elif p % 4 == 3:
            if e % 2:
                return []
            partial = [(z[0] * p ** (e // 2), z[1] * p ** (e // 2)) for z in partial]
        else:
            a, b = _prime_as_two_squares(p)
            pi, pib = (a, b), (a, -b)
            choices = [_gmul(_gpow(pi, j), _gpow(pib, e - j)) for j in range(e + 1)]
            partial = [_gmul(z, c) for z in partial for c in choices]
    units = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    return sorted({_gmul(z, u) for z in partial for u in units})


# ---------------------------------------------------------------------------
# Annuli
# ---------------------------------------------------------------------------


def _column_scan(n_lo: int, n_hi: int) -> np.ndarray:
    r = math.isqrt(n_hi)
    xs, ys = [], []
    for x in range(-r, r + 1):
        b = n_hi - x * x
        a = n_lo - x * x
        y_min = 0 if a <= 0 else math.isqrt(a - 1) + 1
        y_max = math.isqrt(b)
        if y_min > y_max:
            continue
        col = np.arange(y_min, y_max + 1, dtype=np.int64)
        if y_min == 0:
            col = np.concatenate([-col[:0:-1], col])
        else:
            col = np.concatenate([-col[::-1], col])
        xs.append(np.full(len(col), x, dtype=np.int64))
        ys.append(col)
    if not xs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.column_stack([np.concatenate(xs), np.concatenate(ys)])


def _shell_scan(n_lo: int, n_hi: int) -> np.ndarray:
    pts = []
    for n in range(max(n_lo, 0), n_hi + 1):
        pts.extend(two_square_reps(n))
    if not pts:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.asarray(pts, dtype=np.int64), axis=0)


def enumerate_annulus(
    spec: AnnulusSpec, cap: int = DEFAULT_POINT_CAP, method: str = "auto"
) -> LatticeSet:
    """All integer points strictly inside the annulus, sorted.

    ``method`` is ``"columns"``, ``"shells"`` or ``"auto"``; auto picks the
    path with the smaller predicted work (number of columns versus number of
    shells times the trial-division bound).
    """
    if spec.predicted_count() > cap:
        raise CapacityError(
            f"annulus lambda={spec.lam}, delta={spec.delta} predicts "
            f"{spec.predicted_count():.3g} points > cap {cap}"
        )
    n_lo, n_hi = spec.norm_window()
    if n_hi > R2_LIMIT:
        raise InputRangeError("annulus radius too large for exact enumeration")
    if n_lo > n_hi:
        return LatticeSet(np.zeros((0, 2), dtype=np.int64), spec)
    if method == "auto":
        column_work = 2 * math.isqrt(n_hi) + 1
        shell_work = (n_hi - n_lo + 1) * (math.isqrt(math.isqrt(n_hi)) + 8)
        method = "shells" if shell_work < column_work else "columns"
    if method == "columns":
        pts = _column_scan(n_lo, n_hi)
    elif method == "shells":
        pts = _shell_scan(n_lo, n_hi)
    else:
        raise ArgumentError(f"unknown enumeration method {method!r}")
    if len(pts) > cap:
        raise CapacityError(f"{len(pts)} points exceed cap {cap}")
    if len(pts):
        pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    return LatticeSet(pts, spec)


def count_annulus(spec: AnnulusSpec) -> int:
    """``sum(r2(n))`` over the admissible squared norms."""
    n_lo, n_hi = spec.norm_window()
    return sum(r2(n) for n in range(max(n_lo, 0), n_hi + 1))


# ---------------------------------------------------------------------------
# Curve neighbourhoods
# ---------------------------------------------------------------------------


def _ellipse_distance(px: np.ndarray, py: np.ndarray, A: float, B: float) -> np.ndarray:
    """Euclidean distance from points to the ellipse ``(x/A)^2 + (y/B)^2 = 1``.

    Vectorised version of the bisection on the Lagrange parameter; works in
    the first quadrant with ``e0 >= e1`` after reflection and axis swap.
    """
    x0, y0 = np.abs(px).astype(float), np.abs(py).astype(float)
    if A < B:
        x0, y0 = y0, x0
        A, B = B, A
    e0, e1 = float(A), float(B)
    dist = np.empty_like(x0)

    gen = (x0 > 0) & (y0 > 0)
    on_y = (x0 == 0) & ~gen
    on_x = (y0 == 0) & (x0 > 0)

    dist[on_y] = np.abs(y0[on_y] - e1)

    if on_x.any():
        xx = x0[on_x]
        inside = xx < (e0 * e0 - e1 * e1) / e0
        d = np.abs(xx - e0)
        if inside.any():
            xi = e0 * e0 * xx[inside] / (e0 * e0 - e1 * e1)
            yi = e1 * np.sqrt(np.clip(1 - (xi / e0) ** 2, 0, None))
            d[inside] = np.minimum(d[inside], np.hypot(xi - xx[inside], yi))
        dist[on_x] = d

    if gen.any():
        gx, gy = x0[gen], y0[gen]
        z0, z1 = gx / e0, gy / e1
        g = z0 * z0 + z1 * z1 - 1
        r0 = (e0 / e1) ** 2
        n0 = r0 * z0
        # root of F(s) = (n0/(s+r0))^2 + (z1/(s+1))^2 - 1 lies in [lo, hi]
        lo = np.where(g < 0, z1 - 1, 0.0)
        hi = np.where(g < 0, 0.0, np.hypot(n0, z1) - 1)
        for _ in range(400):
            s = 0.5 * (lo + hi)
            f = (n0 / (s + r0)) ** 2 + (z1 / (s + 1)) ** 2 - 1
            pos = f > 0
            lo = np.where(pos, s, lo)
            hi = np.where(pos, hi, s)
            if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(s))):
                break
        else:
            bad = int(np.argmax(hi - lo))
            raise NumericalError("ellipse projection did not converge", (gx[bad], gy[bad]))
        s = 0.5 * (lo + hi)
        qx = r0 * gx / (s + r0)
        qy = gy / (s + 1)
        dist[gen] = np.hypot(qx - gx, qy - gy)
    return dist


def _parabola_distance(x: int, y: int, lam: float, xlo: float, xhi: float) -> float:
    """Distance from ``(x, y)`` to the arc ``{(X, X^2/lam): xlo <= X <= xhi}``."""
    cands = [xlo, xhi]
    roots = np.roots([2.0 / lam**2, 0.0, 1.0 - 2.0 * y / lam, -float(x)])
    scale = max(1.0, abs(x), abs(xlo), abs(xhi))
    for r in roots:
        if abs(r.imag) > 1e-6 * scale:
            continue
        t = r.real
        for _ in range(60):
            g = 2 * t**3 / lam**2 + (1 - 2 * y / lam) * t - x
            dg = 6 * t**2 / lam**2 + (1 - 2 * y / lam)
            if dg == 0:
                break
            step = g / dg
            t -= step
            if abs(step) <= 1e-15 * max(1.0, abs(t)):
                break
        g = 2 * t**3 / lam**2 + (1 - 2 * y / lam) * t - x
        if abs(g) > 1e-9 * scale:
            raise NumericalError("parabola projection did not converge", (x, y))
        if xlo <= t <= xhi:
            cands.append(t)
    c = np.asarray(cands)
    return float(np.sqrt(((c - x) ** 2 + (c * c / lam - y) ** 2).min()))


def _arc_y_range(f, xa: float, xb: float, turning: float) -> Tuple[float, float]:
    """Range of a function that is monotone on each side of ``turning``."""
    vals = [f(xa), f(xb)]
    if xa < turning < xb:
        vals.append(f(turning))
    return min(vals), max(vals)


def enumerate_curve_neighborhood(
    curve: CurveSpec, lam: float, delta: float, cap: int = DEFAULT_POINT_CAP
) -> LatticeSet:
    """Integer points at Euclidean distance ``< delta`` from ``lam * curve``."""
    lam, delta = float(lam), float(delta)
    if lam <= 2 or not 0 < delta < lam:
        raise ArgumentError("need lambda > 2 and 0 < delta < lambda")
    source = (curve, lam, delta)
    if curve.kind == "unit-circle":
        pts = enumerate_annulus(AnnulusSpec(lam, delta), cap=cap).points
        return LatticeSet(pts, source)

    tol = 1e-12 * lam
    reach = delta + tol
    found = []

    if curve.kind == "ellipse":
        A, B = lam * curve.a, lam * curve.b
        if 4 * math.pi * max(A, B) * delta > cap:
            raise CapacityError("predicted ellipse neighbourhood exceeds cap")

        def upper(X):
            return B * math.sqrt(max(0.0, 1 - (X / A) ** 2))

        cx, cy = [], []
        for x in range(math.ceil(-A - reach), math.floor(A + reach) + 1):
            xa, xb = max(x - reach, -A), min(x + reach, A)
            if xa > xb:
                continue
            ymin, ymax = _arc_y_range(upper, xa, xb, 0.0)
            for y in range(math.ceil(ymin - reach), math.floor(ymax + reach) + 1):
                cx.append(x)
                cy.append(y)
                if y != 0:
                    cx.append(x)
                    cy.append(-y)
        if cx:
            px, py = np.asarray(cx), np.asarray(cy)
            d = _ellipse_distance(px, py, A, B)
            keep = d < delta
            found = np.column_stack([px[keep], py[keep]])
    else:
        xlo, xhi = lam * curve.domain[0], lam * curve.domain[1]
        if 4 * (xhi - xlo + 2) * (delta + 1) > cap:
            raise CapacityError("predicted parabola candidate strip exceeds cap")

        def height(X):
            return X * X / lam

        pts = []
        for x in range(math.ceil(xlo - reach), math.floor(xhi + reach) + 1):
            xa, xb = max(x - reach, xlo), min(x + reach, xhi)
            if xa > xb:
                continue
            ymin, ymax = _arc_y_range(height, xa, xb, 0.0)
            for y in range(math.ceil(ymin - reach), math.floor(ymax + reach) + 1):
                if _parabola_distance(x, y, lam, xlo, xhi) < delta:
                    pts.append((x, y))
        found = pts
    return LatticeSet.from_points(found, source)


def brute_force_points(
    predicate, xs: Sequence[int], ys: Sequence[int]
) -> list:
    """Helper for oracles: all ``(x, y)`` on a grid satisfying ``predicate``."""
    return [(x, y) for x in xs for y in ys if predicate(x, y)]

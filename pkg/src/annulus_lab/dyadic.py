"""Mollified annulus symbol, its Poisson dual, Bessel transform and the
dyadic exponential sums.

Conventions: ``e(t) = exp(2*pi*i*t)`` and ``f^(xi) = int f(x) e(-x . xi) dx``.
With them the arc-length measure of the unit circle has transform
``J(r) = 2*pi*J0(2*pi*r)`` and every phase that is written ``e^{i|xi|}`` in
the classical asymptotics becomes ``e(|xi|)`` here.

The mollifier is the tensor product ``chi(x) = chi1(x1) * chi1(x2)`` with
``chi1(t) = (3/4) * sinc(t/2)**4``.  Its transform ``chi1^`` is the cubic
B-spline supported in ``[-1, 1]`` with ``chi1^(0) = 1``, so ``chi >= 0`` and
the Poisson dual sum is finite.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import ArgumentError, CapacityError, NumericalError

try:  # optional JIT for the large exponential sums
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

# exponential-sum exponent pair for q = 3
MULLER_Q = 3
MULLER_QQ = 2**MULLER_Q
MULLER_OMEGA = 2 / (4 * (MULLER_QQ - 1) + 2 * MULLER_QQ)

SPECTRAL_POINT_CAP = 2 * 10**6


# ---------------------------------------------------------------------------
# Bessel J0
# ---------------------------------------------------------------------------


def _j0_series(z: float) -> float:
    q = -0.25 * z * z
    term, total, k = 1.0, 1.0, 0
    while True:
        k += 1
        term *= q / (k * k)
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)):
            return total


def _j0_miller(z: float) -> float:
    """Backward recurrence normalised by ``J0 + 2*sum J_{2k} = 1``."""
    n = 2 * ((int(z) + 40) // 2)
    jp1, j = 0.0, 1e-300
    norm = 0.0
    for k in range(n, 0, -1):
        jm1 = 2 * k / z * j - jp1
        jp1, j = j, jm1
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2 * j
        if abs(j) > 1e250:
            j *= 1e-250
            jp1 *= 1e-250
            norm *= 1e-250
    norm += j
    return j / norm


def _j0_asymptotic(z: float) -> float:
    """Hankel expansion, summed until the terms stop decreasing."""
    # term k is (-1)^k b_k / z^k with b_k = prod_{i<=k} (2i-1)^2 / (k! 8^k);
    # even k feed P with sign (-1)^(k/2), odd k feed Q with sign (-1)^((k-1)/2)
    p = q = 0.0
    term = 1.0
    for k in range(200):
        if k % 4 in (0, 1):
            if k % 2 == 0:
                p += term
            else:
                q += term
        else:
            if k % 2 == 0:
                p -= term
            else:
                q -= term
        nxt = -term * (2 * k + 1) ** 2 / ((k + 1) * 8 * z)
        if abs(nxt) < 1e-18 or abs(nxt) >= abs(term):
            break
        term = nxt
    chi = z - math.pi / 4
    return math.sqrt(2 / (math.pi * z)) * (p * math.cos(chi) - q * math.sin(chi))


def bessel_j0(z: float) -> float:
    z = abs(float(z))
    if z <= 8.0:
        return _j0_series(z)
    if z <= 20.0:
        return _j0_miller(z)
    return _j0_asymptotic(z)


def bessel_J(r) -> float:
    """Transform of arc length on the unit circle: ``2*pi*J0(2*pi*r)``."""
    r = float(r)
    if r < 0:
        raise ArgumentError("bessel_J needs r >= 0")
    return 2 * math.pi * bessel_j0(2 * math.pi * r)


_bessel_J_vec = np.vectorize(bessel_J, otypes=[float])


# ---------------------------------------------------------------------------
# Mollifier
# ---------------------------------------------------------------------------


def chi1(t):
    """``(3/4) sinc(t/2)**4`` with ``sinc(u) = sin(pi u)/(pi u)``."""
    return 0.75 * np.sinc(np.asarray(t, dtype=float) / 2) ** 4


def chi1_hat(u):
    """Cubic B-spline: ``1 - 6u^2 + 6|u|^3`` on ``|u| <= 1/2``, ``2(1-|u|)^3`` up to 1."""
    a = np.abs(np.asarray(u, dtype=float))
    inner = 1 - 6 * a * a + 6 * a**3
    outer = 2 * (1 - a) ** 3
    return np.where(a <= 0.5, inner, np.where(a < 1, outer, 0.0))


def chi_hat(lam: float, delta: float, xi) -> float:
    """``lam*delta*J(lam*|xi|) * chi1^(delta*xi1) * chi1^(delta*xi2)``."""
    xi = np.asarray(xi, dtype=float)
    w = chi1_hat(delta * xi[..., 0]) * chi1_hat(delta * xi[..., 1])
    r = lam * np.hypot(xi[..., 0], xi[..., 1])
    vals = np.zeros_like(w)
    nz = w != 0
    if np.ndim(w) == 0:
        return float(lam * delta * bessel_J(float(r)) * w) if nz else 0.0
    vals[nz] = lam * delta * _bessel_J_vec(r[nz]) * w[nz]
    return vals


def _n_nodes(lam: float, delta: float) -> int:
    band = 2 * math.pi * math.sqrt(2) * lam / delta
    return 1 << math.ceil(math.log2(1.25 * band + 64))


def chi_annulus(lam: float, delta: float, pts, n_nodes: Optional[int] = None,
                check: bool = True) -> np.ndarray:
    """``chi_{lam,delta}(k) = (lam/delta) int_0^{2pi} chi((k - lam w(t))/delta) dt``.

    Periodic trapezoid rule.  The integrand is band limited in ``t`` (the
    transform of ``chi`` has compact support) so the rule is exact up to
    rounding once the node count exceeds the band; ``check`` repeats the
    rule with twice the nodes on up to 288 of the points and raises
    :class:`NumericalError` on disagreement.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    N = n_nodes or _n_nodes(lam, delta)
    out = _chi_trap(lam, delta, pts, N)
    if check and len(pts):
        sel = np.linspace(0, len(pts) - 1, min(len(pts), 256)).astype(int)
        sel = np.union1d(sel, np.argsort(-out)[:32])
        fine = _chi_trap(lam, delta, pts[sel], 2 * N)
        err = np.abs(fine - out[sel]).max()
        if err > 1e-9 * max(1.0, np.abs(out).max()):
            raise NumericalError(f"circle quadrature unresolved (N={N}, diff={err:.3g})")
    return out


def _chi_trap(lam, delta, pts, N):
    # chi1(t) = 0.75 * (sin(a)/a)**4 with a = pi*t/2; for t = (k - lam*c)/delta
    # write a = A - B and expand sin(A - B) to share work across nodes
    t = 2 * math.pi * np.arange(N) / N
    scale = math.pi / (2 * delta)
    bx, by = scale * lam * np.cos(t), scale * lam * np.sin(t)
    sbx, cbx, sby, cby = np.sin(bx), np.cos(bx), np.sin(by), np.cos(by)
    out = np.empty(len(pts))
    chunk = max(1, 2**20 // N)
    for i in range(0, len(pts), chunk):
        p = pts[i:i + chunk]
        ax, ay = scale * p[:, 0:1], scale * p[:, 1:2]
        fx = _sinc4(np.sin(ax) * cbx - np.cos(ax) * sbx, ax - bx)
        fy = _sinc4(np.sin(ay) * cby - np.cos(ay) * sby, ay - by)
        out[i:i + chunk] = (fx * fy).sum(axis=1)
    return out * (0.5625 * lam / delta) * (2 * math.pi / N)


def _sinc4(num, den):
    # sin(a)/a = 1 - a^2/6 + ..., which is 1 to double precision below 1e-8
    small = np.abs(den) < 1e-8
    r = np.where(small, 1.0, num / np.where(small, 1.0, den))
    r = r * r
    return r * r


@dataclass(frozen=True)
class MollifierSpec:
    """The symbol ``chi_{lam,delta}`` for a fixed annulus.

    ``floor`` is the observed minimum of the symbol over sample points of the
    closed annulus (3 radii times 64 angles); it is positive for every
    admissible ``(lam, delta)`` but depends on them.
    """

    lam: float
    delta: float
    floor: float = field(init=False)

    def __post_init__(self):
        if self.lam <= 0 or self.delta <= 0:
            raise ArgumentError("lambda and delta must be positive")
        th = 2 * math.pi * np.arange(64) / 64
        pts = np.concatenate([np.column_stack([r * np.cos(th), r * np.sin(th)])
                              for r in (self.lam - self.delta, self.lam, self.lam + self.delta)])
        vals = chi_annulus(self.lam, self.delta, pts)
        object.__setattr__(self, "floor", float(vals.min()))
        if not self.floor > 0:
            raise NumericalError("mollified symbol is not positive on the annulus")

    def __call__(self, pts) -> np.ndarray:
        return chi_annulus(self.lam, self.delta, pts)


def _spectral_radius(lam: float, delta: float, tol: float) -> float:
    """Half-width ``D`` such that the symbol's tail beyond ``||k|-lam| > D``
    sums to less than ``tol``.

    Uses ``chi1(t) <= 0.1 * t**-4`` averaged over oscillations and counts
    lattice points by area on both sides of the circle.
    """
    c = 0.1 * delta**4

    def tail(D):
        return 2 * math.pi * c * (2 * lam / (3 * D**3) + 1 / (2 * D**2)) * 2

    D = delta
    while tail(D) > tol:
        D *= 1.25
    return D


def phi_flat(lam: float, delta: float, x, mode: str = "spectral",
             truncation: Optional[float] = None, tol: float = 1e-7) -> complex:
    """``sum_k chi_{lam,delta}(k) e(k . x)`` in either of its two forms.

    ``spectral`` sums the symbol over lattice points within the tail radius
    chosen for ``tol``; ``spatial`` sums ``chi_hat(m - x)`` over lattice
    points ``m`` with ``|m - x| <= truncation`` (default ``sqrt(2)/delta + 1``,
    beyond which every term vanishes).
    """
    x = np.asarray(x, dtype=float).reshape(2)
    if mode == "spatial":
        R = math.sqrt(2) / delta + 1 if truncation is None else float(truncation)
        xs = np.arange(math.floor(x[0] - R), math.ceil(x[0] + R) + 1)
        ys = np.arange(math.floor(x[1] - R), math.ceil(x[1] + R) + 1)
        mx, my = np.meshgrid(xs, ys, indexing="ij")
        d = np.column_stack([mx.ravel() - x[0], my.ravel() - x[1]])
        d = d[np.hypot(d[:, 0], d[:, 1]) <= R]
        return complex(np.sum(chi_hat(lam, delta, d)))
    if mode != "spectral":
        raise ArgumentError(f"unknown mode {mode!r}")
    k, vals = spectral_table(lam, delta, tol)
    phase = np.exp(2j * np.pi * (k @ x))
    return complex(np.sum(vals * phase))


@functools.lru_cache(maxsize=16)
def spectral_table(lam: float, delta: float, tol: float = 1e-7):
    """Lattice points within the tail radius and the symbol at each of them."""
    D = _spectral_radius(lam, delta, tol)
    r_out = lam + D
    r_in = max(0.0, lam - D)
    if math.pi * (r_out**2 - r_in**2) > SPECTRAL_POINT_CAP:
        raise CapacityError("spectral sum would need too many lattice points")
    R = math.ceil(r_out)
    g = np.arange(-R, R + 1)
    kx, ky = np.meshgrid(g, g, indexing="ij")
    k = np.column_stack([kx.ravel(), ky.ravel()])
    rad = np.hypot(k[:, 0], k[:, 1])
    k = k[(rad <= r_out) & (rad >= r_in)]
    # the symbol is invariant under the symmetries of the square, so it is
    # evaluated on 0 <= y <= x only
    fund = np.abs(k).max(axis=1), np.abs(k).min(axis=1)
    key = fund[0] * (2 * R + 1) + fund[1]
    uniq, inv = np.unique(key, return_inverse=True)
    base = np.column_stack([uniq // (2 * R + 1), uniq % (2 * R + 1)]).astype(float)
    vals = chi_annulus(lam, delta, base)[inv]
    k = k.astype(float)
    k.setflags(write=False)
    vals.setflags(write=False)
    return k, vals


# ---------------------------------------------------------------------------
# Smooth dyadic partition
# ---------------------------------------------------------------------------


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-1.0 / t[m])
    return out


def beta(r):
    """Smooth step: 1 on ``[0, 1]``, 0 on ``[2, inf)``."""
    r = np.asarray(r, dtype=float)
    a, b = _h(2 - r), _h(r - 1)
    return a / (a + b)


def phi_bump(r):
    return beta(2 * np.asarray(r, dtype=float))


def psi_bump(r):
    """``beta(r) - beta(2r)``, supported in ``[1/2, 2]``."""
    r = np.asarray(r, dtype=float)
    return beta(r) - beta(2 * r)


def partition_residual(r, levels: int = 60) -> np.ndarray:
    """``|phi(r) + sum_{M = 1, 2, 4, ...} psi(r/M) - 1|``."""
    r = np.asarray(r, dtype=float)
    total = phi_bump(r)
    for k in range(levels):
        total = total + psi_bump(r / 2.0**k)
    return np.abs(total - 1)


# ---------------------------------------------------------------------------
# Exponential sums
# ---------------------------------------------------------------------------


def _psi_scalar(t: float) -> float:
    def h(s):
        return math.exp(-1.0 / s) if s > 0 else 0.0

    def b(r):
        a, c = h(2 - r), h(r - 1)
        return a / (a + c)

    return b(t) - b(2 * t)


def _exp_sum_numpy(lam, M, x0, x1):
    R = 2.0 * M
    re = im = absum = 0.0
    count = 0
    xs = np.arange(math.floor(x0 - R), math.ceil(x0 + R) + 1) - x0
    for ny in range(math.floor(x1 - R), math.ceil(x1 + R) + 1):
        dy = ny - x1
        r = np.sqrt(xs * xs + dy * dy)
        t = r / M
        m = (t > 0.5) & (t < 2.0)
        if not m.any():
            continue
        rr, tt = r[m], t[m]
        w = psi_bump(tt) / np.sqrt(np.sqrt(1 + rr * rr))
        ph = lam * rr
        ph -= np.floor(ph)
        re += float(np.sum(w * np.cos(2 * np.pi * ph)))
        im += float(np.sum(w * np.sin(2 * np.pi * ph)))
        absum += float(np.sum(np.abs(w)))
        count += int(m.sum())
    return re, im, absum, count


if numba is not None:
    @numba.njit(cache=True, fastmath=False)
    def _exp_sum_jit(lam, M, x0, x1):  # pragma: no cover - compiled
        R = 2.0 * M
        re = 0.0
        im = 0.0
        absum = 0.0
        count = 0
        lo_y = math.floor(x1 - R)
        hi_y = math.ceil(x1 + R)
        for ny in range(lo_y, hi_y + 1):
            dy = ny - x1
            span2 = R * R - dy * dy
            if span2 <= 0:
                continue
            span = math.sqrt(span2)
            for nx in range(math.floor(x0 - span), math.ceil(x0 + span) + 1):
                dx = nx - x0
                r = math.sqrt(dx * dx + dy * dy)
                t = r / M
                if t <= 0.5 or t >= 2.0:
                    continue
                # psi(t) = beta(t) - beta(2t); on (1/2, 1] only the second
                # term moves and on [1, 2) only the first, and on (1, 2)
                # beta(u) = 1 / (1 + exp(1/(2-u) - 1/(u-1)))
                u = 2.0 * t if t < 1.0 else t
                if u == 1.0:
                    bu = 1.0
                else:
                    bu = 1.0 / (1.0 + math.exp(1.0 / (2.0 - u) - 1.0 / (u - 1.0)))
                ps = 1.0 - bu if t < 1.0 else bu
                w = ps / math.sqrt(math.sqrt(1.0 + r * r))
                ph = lam * r
                ph -= math.floor(ph)
                re += w * math.cos(2.0 * math.pi * ph)
                im += w * math.sin(2.0 * math.pi * ph)
                absum += abs(w)
                count += 1
        return re, im, absum, count
else:  # pragma: no cover
    _exp_sum_jit = None


@dataclass
class ExpSumSample:
    lam: float
    delta: float
    M: float
    x: tuple
    value: complex
    abs_sum: float
    count: int
    trivial_bound: float
    muller_bound: float
    in_range: bool

    @property
    def c_psi(self) -> float:
        """``sup|psi| * (count/M^2) * sqrt(2)``; triangle inequality constant."""
        return (self.count / self.M**2) * math.sqrt(2) if self.count else 0.0

    @property
    def trivial_envelope(self) -> float:
        return self.trivial_bound * self.c_psi


def exp_sum_S(lam: float, delta: float, M: float, x, engine: str = "auto") -> ExpSumSample:
    """``lam^(1/2) delta sum_n psi(|n-x|/M) e(lam |n-x|) / <n-x>^(1/2)``.

    ``engine`` selects the compiled loop (``jit``) or the numpy one; ``auto``
    prefers the compiled loop when numba is importable.
    """
    x0, x1 = (float(v) for v in x)
    if M <= 0:
        raise ArgumentError("M must be positive")
    use_jit = engine == "jit" or (engine == "auto" and _exp_sum_jit is not None)
    if use_jit:
        if _exp_sum_jit is None:
            raise ArgumentError("numba is not available")
        re, im, absum, count = _exp_sum_jit(float(lam), float(M), x0, x1)
    elif engine in ("auto", "numpy"):
        re, im, absum, count = _exp_sum_numpy(float(lam), float(M), x0, x1)
    else:
        raise ArgumentError(f"unknown engine {engine!r}")
    pref = math.sqrt(lam) * delta
    return ExpSumSample(
        lam, delta, M, (x0, x1), pref * complex(re, im), pref * absum, int(count),
        pref * M**1.5, lam ** (0.5 + MULLER_OMEGA) * delta * M ** (1.5 - (MULLER_Q + 1) * MULLER_OMEGA),
        M <= 1 / delta,
    )


@dataclass
class DyadicRow:
    M: int
    emp_sup: float
    trivial: float
    envelope: float
    muller: float
    muller_valid: bool

    @property
    def ratio_trivial(self) -> float:
        return self.emp_sup / self.trivial

    @property
    def ratio_muller(self) -> float:
        return self.emp_sup / self.muller


@dataclass
class DyadicReport:
    lam: float
    delta: float
    seed: int
    n_samples: int
    rows: List[DyadicRow]
    exponent: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M", "emp_sup", "trivial", "muller", "ratio_trivial", "ratio_muller"])
        for r in self.rows:
            w.writerow([r.M, repr(r.emp_sup), repr(r.trivial), repr(r.muller),
                        repr(r.ratio_trivial), repr(r.ratio_muller)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "lambda": self.lam, "delta": self.delta, "seed": self.seed,
            "samples": self.n_samples, "exponent": self.exponent,
            "rows": [dict(r.__dict__) for r in self.rows],
        }, sort_keys=True)


def sample_points(n: int, seed: int) -> np.ndarray:
    """``n`` points of ``[0,1)^2`` from a counter-based generator."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.random((n, 2))


def dyadic_bound_report(lam: float, delta: float, x_samples: int = 64, seed: int = 0,
                        engine: str = "auto") -> DyadicReport:
    """Empirical ``sup_x |S_{lam,M,x}|`` over dyadic ``M <= 1/delta``."""
    from .analysis import fit_slope

    xs = sample_points(x_samples, seed)
    rows = []
    M = 1
    while M <= 1 / delta:
        samples = [exp_sum_S(lam, delta, M, x, engine) for x in xs]
        sup = max(abs(s.value) for s in samples)
        env = max(s.trivial_envelope for s in samples)
        s0 = samples[0]
        rows.append(DyadicRow(M, sup, s0.trivial_bound, env, s0.muller_bound, lam > M**1.25))
        M *= 2
    good = [(r.M, r.emp_sup) for r in rows if r.emp_sup > 0]
    expo = fit_slope([g[0] for g in good], [g[1] for g in good]).slope if len(good) >= 2 else math.nan
    return DyadicReport(lam, delta, seed, x_samples, rows, expo)

"""Trigonometric polynomials with lattice frequency support and their L^p norms.

A polynomial ``f(x) = sum_k a_k e(k . x)`` with ``|k_i| <= M`` is sampled on
the ``N x N`` grid ``(i/N, j/N)`` with ``N`` a power of two at least
``oversampling * (2M + 2)``.  Since ``M < N/2`` no two frequencies alias,
so the samples are the exact values of ``f`` up to FFT rounding.

Large grids are never stored: :func:`lp_norm` streams over blocks of grid
columns and accumulates ``sum |f|^p`` on the fly.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .caps import partition, sector_indices
from .errors import ArgumentError, CapacityError
from .lattice import AnnulusSpec, LatticeSet, enumerate_annulus

SAMPLE_CAP = 2**30
MATERIALIZE_CAP = 2**25
DEFAULT_OVERSAMPLING = 4.0
_BLOCK_ELEMS = 2**22
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class FourierSupport:
    """Frequencies (a :class:`LatticeSet`) with complex coefficients."""

    points: LatticeSet
    coefficients: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.points)
        if self.coefficients is None:
            c = np.ones(n, dtype=complex)
        else:
            c = np.asarray(self.coefficients, dtype=complex).reshape(-1)
            if len(c) != n:
                raise ArgumentError("one coefficient per frequency is required")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_points(cls, points, coefficients=None) -> "FourierSupport":
        """Build from unsorted points; coefficients follow their points."""
        arr = np.asarray(points, dtype=np.int64).reshape(-1, 2)
        if coefficients is None:
            return cls(LatticeSet.from_points(arr))
        coef = np.asarray(coefficients, dtype=complex).reshape(-1)
        if len(coef) != len(arr):
            raise ArgumentError("one coefficient per frequency is required")
        if len(arr) == 0:
            return cls(LatticeSet.from_points(arr), coef)
        order = np.lexsort((arr[:, 1], arr[:, 0]))
        arr, coef = arr[order], coef[order]
        keep = np.ones(len(arr), dtype=bool)
        keep[1:] = np.any(np.diff(arr, axis=0) != 0, axis=1)
        if not keep.all():
            raise ArgumentError("duplicate frequencies in support")
        return cls(LatticeSet(arr), coef)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0

    @property
    def max_freq(self) -> int:
        return self.points.max_coord

    @property
    def l1(self) -> float:
        return float(np.abs(self.coefficients).sum())

    @property
    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))

    def translated(self, shift) -> "FourierSupport":
        """Shift every frequency by an integer vector (|f| is unchanged)."""
        s = np.asarray(shift, dtype=np.int64).reshape(2)
        return FourierSupport(LatticeSet(self.points.points + s), self.coefficients)

    def centered(self) -> "FourierSupport":
        """Translate so that the bounding box of the frequencies is centred."""
        if self.empty:
            return self
        p = self.points.points
        c = (p.min(axis=0) + p.max(axis=0)) // 2
        return self.translated(-c)

    def modulated(self, x0) -> "FourierSupport":
        """Coefficients times ``e(k . x0)``, i.e. ``f`` translated by ``-x0``."""
        x0 = np.asarray(x0, dtype=float).reshape(2)
        phase = np.exp(2j * np.pi * (self.points.points @ x0))
        return FourierSupport(self.points, self.coefficients * phase)


def evaluate(support: FourierSupport, xs) -> np.ndarray:
    """Direct evaluation of ``f`` at arbitrary points ``xs`` of shape (n, 2)."""
    xs = np.asarray(xs, dtype=float).reshape(-1, 2)
    if support.empty:
        return np.zeros(len(xs), dtype=complex)
    ph = np.exp(2j * np.pi * (xs @ support.points.points.T.astype(float)))
    return ph @ support.coefficients


def grid_size(max_freq: int, oversampling: float = DEFAULT_OVERSAMPLING) -> int:
    if oversampling < 2:
        raise ArgumentError("oversampling must be at least 2")
    need = oversampling * (2 * max_freq + 2)
    return 1 << max(1, math.ceil(math.log2(need)))


class KernelGrid:
    """Alias-free sampling of a trigonometric polynomial.

    ``samples[i, j] = f(i/N, j/N)``.  The full array is built on first access
    and only when it fits under ``MATERIALIZE_CAP``; norms never need it.
    """

    def __init__(self, support: FourierSupport, N: int, oversampling: float):
        self.support = support
        self.N = int(N)
        self.oversampling = float(oversampling)
        self.max_freq = support.max_freq
        self._samples = None
        self._stats: Dict = {}

    def __repr__(self):
        return f"KernelGrid(N={self.N}, max_freq={self.max_freq}, n_freq={len(self.support)})"

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            N = self.N
            if N * N > MATERIALIZE_CAP:
                raise CapacityError(
                    f"materialising a {N}x{N} grid exceeds {MATERIALIZE_CAP} samples; "
                    "use lp_norm or iter_blocks instead")
            A = np.zeros((N, N), dtype=complex)
            if not self.support.empty:
                k = self.support.points.points % N
                np.add.at(A, (k[:, 0], k[:, 1]), self.support.coefficients)
            s = np.fft.ifft2(A) * (N * N)
            s.setflags(write=False)
            self._samples = s
        return self._samples

    def iter_blocks(self, block: Optional[int] = None):
        """Yield ``(j0, F)`` where ``F[i, jj] = f(i/N, (j0 + jj)/N)``."""
        N = self.N
        sup = self.support
        if sup.empty:
            B = block or N
            for j0 in range(0, N, B):
                yield j0, np.zeros((N, min(B, N - j0)), dtype=complex)
            return
        if self._samples is not None:
            yield 0, self._samples
            return
        pts = sup.points.points  # sorted by k1 already
        coef = sup.coefficients
        P = len(pts)
        B = block or max(1, min(N, _BLOCK_ELEMS // max(N, P)))
        k1 = pts[:, 0]
        starts = np.flatnonzero(np.r_[True, k1[1:] != k1[:-1]])
        rows = k1[starts] % N
        k2 = (pts[:, 1] % N)[:, None]
        table = np.exp(2j * np.pi * np.arange(N) / N)
        G = np.zeros((N, B), dtype=complex)
        for j0 in range(0, N, B):
            b = min(B, N - j0)
            js = np.arange(j0, j0 + b, dtype=np.int64)[None, :]
            terms = table[(k2 * js) % N] * coef[:, None]
            G[:, :b] = 0
            G[rows, :b] = np.add.reduceat(terms, starts, axis=0)
            F = np.fft.ifft(G[:, :b], axis=0) * N
            yield j0, F

    def _scan(self, ps: Iterable[float]) -> Dict:
        """Accumulate ``sum |f|^p`` for each finite p plus ``max |f|``."""
        want = [p for p in ps if p != math.inf and p not in self._stats]
        if want or "max" not in self._stats:
            sums = {p: 0.0 for p in want}
            mx, arg = -1.0, (0, 0)
            for j0, F in self.iter_blocks():
                a2 = F.real**2 + F.imag**2
                for p in want:
                    sums[p] += float(np.sum(a2 if p == 2 else a2 ** (p / 2)))
                i = int(np.argmax(a2))
                if a2.flat[i] > mx:
                    mx = float(a2.flat[i])
                    arg = (i // a2.shape[1], j0 + i % a2.shape[1])
            self._stats.update(sums)
            self._stats["max"] = math.sqrt(max(mx, 0.0))
            self._stats["argmax"] = arg
        return self._stats


def synthesize(support: FourierSupport, oversampling: float = DEFAULT_OVERSAMPLING,
               sample_cap: int = SAMPLE_CAP) -> KernelGrid:
    N = grid_size(support.max_freq, oversampling)
    if N * N > sample_cap:
        raise CapacityError(f"grid {N}x{N} exceeds the sample cap {sample_cap}")
    return KernelGrid(support, N, oversampling)


@dataclass
class NormReport:
    """L^p norm of a grid.

    ``error_estimate`` bounds the error of ``value``; ``power`` is
    ``value**p`` (the integral of ``|f|^p``) with its own bound ``power_error``.
    """

    p: float
    value: float
    method: str
    oversampling: float
    error_estimate: float
    power: Optional[float] = None
    power_error: Optional[float] = None

    def to_json(self) -> str:
        d = dict(self.__dict__)
        if d["p"] == math.inf:
            d["p"] = "inf"
        return json.dumps(d, sort_keys=True)


def _rounding_error(grid: KernelGrid) -> float:
    """Bound on the absolute error of one FFT sample."""
    return 4 * _EPS * max(1.0, math.log2(grid.N)) * max(grid.support.l1, 1.0) * 2


def lp_norm(grid: KernelGrid, p: float, method: Optional[str] = None) -> NormReport:
    p = float(p)
    if not p >= 2:
        raise ArgumentError("p must lie in [2, inf]")
    sup = grid.support
    if method == "parseval":
        if p != 2:
            raise ArgumentError("the parseval method is only defined for p = 2")
        v = sup.l2
        return NormReport(2.0, v, "parseval", grid.oversampling, 0.0, v * v, 0.0)
    if method not in (None, "grid-quadrature"):
        raise ArgumentError(f"unknown norm method {method!r}")
    N = grid.N
    step = math.sqrt(2) / (2 * N)
    grad = 2 * math.pi * grid.max_freq * sup.l1
    if sup.empty:
        return NormReport(p, 0.0, "grid-quadrature", grid.oversampling, 0.0, 0.0, 0.0)
    stats = grid._scan([p])
    mx = stats["max"]
    if p == math.inf:
        return NormReport(p, mx, "grid-quadrature", grid.oversampling,
                          grad * step + _rounding_error(grid))
    power = stats[p] / (N * N)
    value = power ** (1 / p)
    top = max(mx, sup.l2)
    if p == int(p) and int(p) % 2 == 0 and N > p * grid.max_freq:
        # |f|^p is a trigonometric polynomial of degree <= p*max_freq < N,
        # so the grid mean is its exact integral; only rounding remains
        power_err = p * top ** (p - 1) * _rounding_error(grid)
    else:
        power_err = p * top ** (p - 1) * (grad * step + _rounding_error(grid))
    if value > 0:
        err = power_err / (p * value ** (p - 1))
        err = min(err, top)
    else:
        err = power_err ** (1 / p)
    return NormReport(p, value, "grid-quadrature", grid.oversampling, err, power, power_err)


def knapp_support(spec: AnnulusSpec, angle: float = 0.0,
                  lset: Optional[LatticeSet] = None) -> FourierSupport:
    """All-ones support on the canonical cap whose sector contains ``angle``."""
    if lset is None:
        lset = enumerate_annulus(spec)
    part = partition(lset, None, spec)
    probe = np.array([[math.cos(angle) * 2**20, math.sin(angle) * 2**20]])
    k = int(sector_indices(probe, part.n_caps)[0])
    cap = part.cap(k)
    return FourierSupport(LatticeSet.from_points(cap.points, spec))


def spherical_support(spec: AnnulusSpec) -> FourierSupport:
    return FourierSupport(enumerate_annulus(spec))


def ratio_2_to_p(support: FourierSupport, p: float,
                 oversampling: float = DEFAULT_OVERSAMPLING) -> float:
    """``||f||_p / ||f||_2``, a lower bound for the 2 -> p operator norm.

    The frequencies are first translated to centre their bounding box; this
    multiplies ``f`` by a unimodular character and so leaves every ``|f|``
    norm unchanged while shrinking the grid.
    """
    if support.empty:
        raise ArgumentError("ratio of an empty support is undefined")
    g = synthesize(support.centered(), oversampling)
    return lp_norm(g, p).value / support.l2


# ---------------------------------------------------------------------------
# Binary grid export
# ---------------------------------------------------------------------------

GRID_MAGIC = b"ANLGRID1"
_DTYPES = {1: np.dtype("<c8"), 2: np.dtype("<c16")}


def write_grid(grid: KernelGrid, path, dtype: str = "complex128") -> None:
    """Header (32 bytes): magic, N (uint64), dtype code (uint32), padding."""
    code = {"complex64": 1, "complex128": 2}.get(dtype)
    if code is None:
        raise ArgumentError("dtype must be complex64 or complex128")
    header = GRID_MAGIC + struct.pack("<QI", grid.N, code)
    header += b"\0" * (32 - len(header))
    with open(path, "wb") as fh:
        fh.write(header)
        if grid.N * grid.N <= MATERIALIZE_CAP:
            fh.write(np.ascontiguousarray(grid.samples, dtype=_DTYPES[code]).tobytes())
            return
        # stream whole rows: column blocks of the transposed polynomial
        sup = grid.support
        swapped = FourierSupport.from_points(sup.points.points[:, ::-1], sup.coefficients)
        for _, F in KernelGrid(swapped, grid.N, grid.oversampling).iter_blocks():
            fh.write(np.ascontiguousarray(F.T, dtype=_DTYPES[code]).tobytes())


def read_grid(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(32)
        if header[:8] != GRID_MAGIC:
            raise ArgumentError("not a grid file")
        N, code = struct.unpack("<QI", header[8:20])
        data = np.frombuffer(fh.read(), dtype=_DTYPES[code])
    return data.reshape(N, N)

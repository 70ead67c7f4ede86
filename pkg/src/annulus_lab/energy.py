"""Exact additive energies of planar lattice sets.

``r_j(v)`` counts ordered j-tuples of points summing to ``v`` and
``E_m = sum_v r_m(v)**2``.  For even ``p = 2m`` this is exactly
``||sum_k e(k . x)||_p^p`` on the torus, which makes it the integer oracle
for the kernel module.

Every path is exact.  The transform path rounds an FFT convolution and is
only accepted after the total mass ``P**j`` and integrality are verified.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ArgumentError, CapacityError, IntegrityError
from .lattice import LatticeSet

log = logging.getLogger(__name__)

HASH_MAX_POINTS = 10**5
DENSE_CELL_CAP = 2**30
LOAD_FACTOR = 0.05
_CHUNK = 2**23
_STRIP_CELLS = 2**24


def exact_sum_squares(values: np.ndarray) -> int:
    """``sum(v*v)`` as a Python int without int64 overflow."""
    v = np.asarray(values, dtype=np.int64).ravel()
    if v.size == 0:
        return 0
    top = int(np.abs(v).max())
    if top >= 2**31:
        return sum(int(x) * int(x) for x in v.tolist())
    chunk = max(1, (2**62) // max(top * top, 1))
    total = 0
    for i in range(0, v.size, chunk):
        c = v[i:i + chunk]
        total += int(np.dot(c, c))
    return total


@dataclass(frozen=True, eq=False)
class SumsetCounts:
    """Multiplicities ``r_j``.

    Sparse storage keeps ``keys`` (n, 2) and positive ``counts``; dense
    storage keeps ``array[vx - lo_x, vy - lo_y]``.  Both are exposed through
    :meth:`items`.
    """

    j: int
    storage: str
    total_mass: int
    keys: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None
    array: Optional[np.ndarray] = None
    origin: Tuple[int, int] = (0, 0)
    method: str = "hash"

    def items(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sorted nonzero keys and their counts."""
        if self.storage == "sparse":
            return self.keys, self.counts
        nz = np.nonzero(self.array)
        keys = np.column_stack([nz[0] + self.origin[0], nz[1] + self.origin[1]]).astype(np.int64)
        return keys, self.array[nz].astype(np.int64)

    def as_dict(self) -> Dict[Tuple[int, int], int]:
        k, c = self.items()
        return {(int(a), int(b)): int(n) for (a, b), n in zip(k.tolist(), c.tolist())}

    def get(self, v) -> int:
        x, y = int(v[0]), int(v[1])
        if self.storage == "dense":
            i, jj = x - self.origin[0], y - self.origin[1]
            if 0 <= i < self.array.shape[0] and 0 <= jj < self.array.shape[1]:
                return int(self.array[i, jj])
            return 0
        i = np.searchsorted(self._encoded, _encode1(x, y))
        if i < len(self.keys) and tuple(self.keys[i]) == (x, y):
            return int(self.counts[i])
        return 0

    @property
    def _encoded(self):
        return self.keys[:, 0] * (1 << 32) + self.keys[:, 1]

    @property
    def support_size(self) -> int:
        if self.storage == "sparse":
            return len(self.counts)
        return int(np.count_nonzero(self.array))

    def energy(self) -> int:
        _, c = self.items()
        return exact_sum_squares(c)


def _encode1(x: int, y: int) -> int:
    return x * (1 << 32) + y


def _points(lset) -> np.ndarray:
    if isinstance(lset, LatticeSet):
        return lset.points
    return LatticeSet.from_points(lset).points


def _box(pts: np.ndarray, j: int):
    lo = pts.min(axis=0) * j
    hi = pts.max(axis=0) * j
    return lo, hi - lo + 1


def _sparse_from_keys(keys: np.ndarray, counts: np.ndarray):
    """Merge duplicate (x, y) keys, summing counts; result sorted."""
    if len(keys) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
    enc = keys[:, 0] * (1 << 32) + keys[:, 1]
    u, inv = np.unique(enc, return_inverse=True)
    c = np.bincount(inv, weights=None if counts is None else counts, minlength=len(u))
    if counts is not None:
        c = np.rint(c).astype(np.int64) if c.dtype.kind == "f" else c.astype(np.int64)
        # bincount with weights goes through float64; exact while < 2**53
        if counts.max(initial=0) * len(counts) >= 2**53:
            c = np.zeros(len(u), dtype=np.int64)
            np.add.at(c, inv, counts)
    ux = np.floor_divide(u + (1 << 31), 1 << 32)
    uy = u - ux * (1 << 32)
    return np.column_stack([ux, uy]).astype(np.int64), c.astype(np.int64)


def _hash_counts(pts: np.ndarray, j: int) -> Tuple[np.ndarray, np.ndarray]:
    if j == 1:
        return pts.copy(), np.ones(len(pts), dtype=np.int64)
    keys1, cnt1 = _hash_counts(pts, j - 1)
    out_k, out_c = [], []
    per = max(1, _CHUNK // max(len(pts), 1))
    for i in range(0, len(keys1), per):
        kk = keys1[i:i + per]
        cc = cnt1[i:i + per]
        s = (kk[:, None, :] + pts[None, :, :]).reshape(-1, 2)
        w = np.repeat(cc, len(pts))
        k, c = _sparse_from_keys(s, w)
        out_k.append(k)
        out_c.append(c)
    return _sparse_from_keys(np.concatenate(out_k), np.concatenate(out_c))


def _dense_counts(pts: np.ndarray, j: int):
    lo, shape = _box(pts, j)
    cells = int(shape[0]) * int(shape[1])
    if cells > DENSE_CELL_CAP:
        raise CapacityError(f"dense box with {cells} cells exceeds {DENSE_CELL_CAP}")
    P = len(pts)
    dtype = np.int32 if P ** (j - 1) < 2**31 else np.int64
    W = int(shape[1])
    if j == 1:
        flat = np.bincount((pts[:, 0] - lo[0]) * W + (pts[:, 1] - lo[1]), minlength=cells)
        return flat.astype(dtype).reshape(shape), lo
    lo2, shape2 = _box(pts, 2)
    W2 = int(shape2[1])
    r2 = np.zeros(int(shape2[0]) * W2, dtype=np.int64)
    per = max(1, _CHUNK // max(P, 1))
    for i in range(0, P, per):
        a = pts[i:i + per]
        sx = (a[:, None, 0] + pts[None, :, 0] - lo2[0]).ravel()
        sy = (a[:, None, 1] + pts[None, :, 1] - lo2[1]).ravel()
        r2 += np.bincount(sx * W2 + sy, minlength=r2.size)
    r2 = r2.reshape(shape2)
    if j == 2:
        return r2.astype(dtype), lo2
    # r3 = r2 * r1: add a shifted copy of r2 for every point
    r3 = np.zeros(tuple(int(s) for s in shape), dtype=dtype)
    nzx, nzy = np.nonzero(r2)
    vals = r2[nzx, nzy].astype(dtype)
    off = pts - pts.min(axis=0)
    for ox, oy in off.tolist():
        r3[nzx + ox, nzy + oy] += vals
    return r3, lo


def _transform_counts(pts: np.ndarray, j: int):
    lo1 = pts.min(axis=0)
    span = pts.max(axis=0) - lo1
    size = [1 << math.ceil(math.log2(j * int(s) + 1)) for s in span]
    if size[0] * size[1] > DENSE_CELL_CAP:
        raise CapacityError("transform grid too large")
    ind = np.zeros(size)
    ind[pts[:, 0] - lo1[0], pts[:, 1] - lo1[1]] = 1.0
    spec = np.fft.rfft2(ind)
    conv = np.fft.irfft2(spec**j, s=size)
    out_shape = (j * int(span[0]) + 1, j * int(span[1]) + 1)
    conv = conv[: out_shape[0], : out_shape[1]]
    r = np.rint(conv)
    P = len(pts)
    if np.abs(conv - r).max(initial=0.0) > 0.25 or r.min(initial=0.0) < 0:
        raise IntegrityError("transform convolution is not integral after rounding")
    r = r.astype(np.int64)
    if int(r.sum()) != P**j:
        raise IntegrityError(f"transform convolution mass {int(r.sum())} != P**{j} = {P**j}")
    return r, j * lo1


def sumset_counts(lset, j: int, method: str = "auto") -> SumsetCounts:
    """Multiplicity function ``r_j`` of ordered j-fold sums.

    ``method`` is one of ``auto``, ``hash``, ``dense`` or ``transform``; the
    transform path falls back to the dense one if its verification fails.
    """
    if j not in (1, 2, 3):
        raise ArgumentError("j must be 1, 2 or 3")
    pts = _points(lset)
    P = len(pts)
    if P == 0:
        return SumsetCounts(j, "sparse", 0, np.zeros((0, 2), dtype=np.int64),
                            np.zeros(0, dtype=np.int64), method="hash")
    if method == "auto":
        lo, shape = _box(pts, j)
        cells = int(shape[0]) * int(shape[1])
        method = "hash" if P**j < LOAD_FACTOR * cells else "dense"
    if method == "hash":
        if P > HASH_MAX_POINTS:
            raise CapacityError(f"hash path limited to {HASH_MAX_POINTS} points")
        k, c = _hash_counts(pts, j)
        out = SumsetCounts(j, "sparse", int(c.sum()), k, c, method="hash")
    elif method == "transform":
        try:
            arr, origin = _transform_counts(pts, j)
            out = SumsetCounts(j, "dense", int(arr.sum()), array=arr,
                               origin=(int(origin[0]), int(origin[1])), method="transform-convolution")
        except IntegrityError as exc:
            log.warning("transform path rejected (%s); using dense accumulation", exc)
            return sumset_counts(lset, j, "dense")
    elif method == "dense":
        arr, origin = _dense_counts(pts, j)
        out = SumsetCounts(j, "dense", int(arr.sum(dtype=np.int64)), array=arr,
                           origin=(int(origin[0]), int(origin[1])), method="dense-convolution")
    else:
        raise ArgumentError(f"unknown method {method!r}")
    if out.total_mass != P**j:
        raise IntegrityError(f"sumset mass {out.total_mass} != {P**j}")
    return out


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------


@dataclass
class EnergyReport:
    m: int
    energy: int
    set_size: int
    method: str
    support_size: int
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"m": self.m, "energy": str(self.energy), "set_size": self.set_size,
                           "method": self.method, "support_size": self.support_size,
                           "diagnostics": self.diagnostics}, sort_keys=True)


def _is_symmetric(pts: np.ndarray) -> bool:
    neg = LatticeSet.from_points(-pts).points
    return np.array_equal(neg, pts)


def _streamed_e3(pts: np.ndarray) -> Tuple[int, int, str]:
    """``E_3`` without storing ``r_3``: strips of ``v_x`` built from ``r_2``.

    For sets symmetric under negation ``r_3(-v) = r_3(v)``, so only strips
    with ``v_x >= 0`` are built and the rest is counted by symmetry.
    Returns ``(energy, support_size, method)``.
    """
    r2 = sumset_counts(pts, 2, "dense")
    keys, cnt = r2.items()
    order = np.argsort(keys[:, 0], kind="stable")
    ux, uy = keys[order, 0], keys[order, 1]
    P = len(pts)
    acc_t = np.int32 if P * P < 2**31 else np.int64
    cnt = cnt[order].astype(acc_t)
    lo = pts.min(axis=0) * 3
    hi = pts.max(axis=0) * 3
    W = int(hi[1] - lo[1]) + 1
    sym = _is_symmetric(pts)
    x_start = 0 if sym else int(lo[0])
    width = max(1, _STRIP_CELLS // W)
    energy = 0
    support = 0
    ax_all, ay_all = pts[:, 0], pts[:, 1]
    for x0 in range(x_start, int(hi[0]) + 1, width):
        x1 = min(x0 + width, int(hi[0]) + 1)
        acc = np.zeros((x1 - x0) * W, dtype=acc_t)
        i0s = np.searchsorted(ux, x0 - ax_all)
        i1s = np.searchsorted(ux, x1 - ax_all)
        for ax, ay, i0, i1 in zip(ax_all.tolist(), ay_all.tolist(), i0s.tolist(), i1s.tolist()):
            if i0 == i1:
                continue
            idx = (ux[i0:i1] + (ax - x0)) * W + (uy[i0:i1] + (ay - int(lo[1])))
            acc[idx] += cnt[i0:i1]
        s = exact_sum_squares(acc)
        nz = int(np.count_nonzero(acc))
        if sym:
            if x0 == 0:
                s0 = exact_sum_squares(acc[:W])
                nz0 = int(np.count_nonzero(acc[:W]))
                energy += 2 * s - s0
                support += 2 * nz - nz0
            else:
                energy += 2 * s
                support += 2 * nz
        else:
            energy += s
            support += nz
    return energy, support, "dense-convolution"


def additive_energy(lset, m: int, method: str = "auto") -> EnergyReport:
    """Exact ``E_m`` for m in {2, 3} with sanity floors asserted."""
    if m not in (2, 3):
        raise ArgumentError("m must be 2 or 3")
    pts = _points(lset)
    P = len(pts)
    if P == 0:
        return EnergyReport(m, 0, 0, "hash", 0, {})
    if m == 3 and method in ("auto", "dense") and P**3 >= LOAD_FACTOR * int(np.prod(_box(pts, 3)[1])):
        energy, supp, used = _streamed_e3(pts)
    else:
        counts = sumset_counts(pts, m, method)
        energy, supp, used = counts.energy(), counts.support_size, counts.method
    if energy < P**m or energy * supp < P ** (2 * m):
        raise IntegrityError(f"energy {energy} violates the diagonal or Cauchy-Schwarz floor")
    diag = {
        "energy_over_P^m": energy / P**m,
        "energy_over_P^2m_per_support": energy * supp / P ** (2 * m),
    }
    if m == 3:
        diag["energy_over_P^3.5"] = energy / P**3.5
    return EnergyReport(m, energy, P, used, supp, diag)


@dataclass
class CrossCheck:
    p: int
    energy: int
    quadrature: float
    rel_diff: float
    error_estimate: float
    flagged: bool


def energy_lp_crosscheck(lset, p: int, oversampling: float = 4.0) -> CrossCheck:
    """Compare ``E_{p/2}`` with the grid value of ``||Phi||_p^p``."""
    from .kernel import FourierSupport, lp_norm, synthesize

    if p not in (4, 6):
        raise ArgumentError("p must be 4 or 6")
    pts = _points(lset)
    rep = additive_energy(pts, p // 2)
    sup = FourierSupport(LatticeSet(pts)).centered()
    nr = lp_norm(synthesize(sup, oversampling), p)
    quad = nr.power if nr.power is not None else 0.0
    diff = abs(quad - rep.energy)
    rel = diff / rep.energy if rep.energy else diff
    err = float(nr.power_error or 0.0)
    return CrossCheck(p, rep.energy, float(quad), float(rel), err, bool(diff > err))

"""Bessel functions of the first kind J_m and their positive zeros.

Self-contained oracle used by every spectral test in the package: no
special-function library is involved, so FEM results can be checked
against a genuinely independent reference.

Evaluation strategy (documented switchover): the ascending power series
is used for x <= 12, where its worst partial term is ~2e4 and the float64
cancellation error stays below 1e-11.  For x > 12 we use Miller's
backward recurrence normalized with J_0(x) + 2*sum_k J_{2k}(x) = 1,
accurate to ~1e-13 over the supported range m <= 20, x <= 100.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

from .errors import RangeError, SolverError

MAX_ORDER = 20
MAX_ARG = 100.0
_SERIES_CUTOFF = 12.0


def _check_range(m: int, x: float) -> None:
    if not isinstance(m, (int,)) or m < 0 or m > MAX_ORDER:
        raise RangeError(f"order m={m} outside supported range [0, {MAX_ORDER}]")
    if not (0.0 <= x <= MAX_ARG):
        raise RangeError(f"argument x={x} outside supported range [0, {MAX_ARG}]")


def _series_j(m: int, x: float) -> float:
    # J_m(x) = sum_k (-1)^k (x/2)^(m+2k) / (k! (m+k)!)
    half = 0.5 * x
    term = half**m / math.factorial(m)
    total = term
    k = 0
    while True:
        k += 1
        term *= -(half * half) / (k * (m + k))
        total += term
        if abs(term) < 1e-18 * (abs(total) + 1e-300) and k > m:
            return total


def _miller_row(x: float, m_top: int) -> list[float]:
    """All of J_0..J_m_top at x by normalized backward recurrence."""
    start = int(max(m_top, x) + 0.5) + 30
    fp, fc = 0.0, 1e-30
    out = [0.0] * (m_top + 1)
    norm = 0.0
    for k in range(start, -1, -1):
        fm = (2.0 * (k + 1) / x) * fc - fp
        fp, fc = fc, fm
        if k <= m_top:
            out[k] = fc
        if k > 0 and k % 2 == 0:
            norm += 2.0 * fc
        # rescale to dodge overflow on long recurrences
        if abs(fc) > 1e250:
            fp *= 1e-250
            fc *= 1e-250
            norm *= 1e-250
            out = [v * 1e-250 for v in out]
    norm += fc
    return [v / norm for v in out]


def bessel_j(m: int, x: float) -> float:
    """J_m(x) with absolute error below 1e-10 for m <= 20, x <= 100."""
    _check_range(m, x)
    if x == 0.0:
        return 1.0 if m == 0 else 0.0
    if x <= _SERIES_CUTOFF:
        return _series_j(m, x)
    return _miller_row(x, m)[m]


def bessel_j_prime(m: int, x: float) -> float:
    """J_m'(x) via J_m' = (J_{m-1} - J_{m+1})/2, with J_0' = -J_1."""
    _check_range(m, x)
    if m == 0:
        return -bessel_j(1, x)
    return 0.5 * (bessel_j(m - 1, x) - _j_next(m, x))


def _j_next(m: int, x: float) -> float:
    # J_{m+1} may exceed MAX_ORDER by one; evaluate without the range guard.
    if x == 0.0:
        return 0.0
    if x <= _SERIES_CUTOFF:
        return _series_j(m + 1, x)
    return _miller_row(x, m + 1)[m + 1]


@dataclass
class BesselRootTable:
    """Append-only cache of the ascending positive zeros of one J_m."""

    order: int
    roots: list[float] = field(default_factory=list)
    tolerance: float = 1e-10

    def validate(self) -> None:
        prev = 0.0
        for r in self.roots:
            if r <= prev:
                raise SolverError("root table not strictly increasing")
            if prev > 0.0 and r - prev <= 2.0:
                raise SolverError("consecutive roots closer than 2")
            if abs(bessel_j(self.order, r)) > self.tolerance:
                raise SolverError(f"|J_{self.order}({r})| exceeds tolerance")
            prev = r


_root_cache: dict[int, BesselRootTable] = {}
_cache_lock = threading.Lock()

_SCAN_STEP = 0.25


def _extend_roots(table: BesselRootTable, k: int) -> None:
    m = table.order
    x = table.roots[-1] + 0.5 * _SCAN_STEP if table.roots else 1e-6
    fx = bessel_j(m, x)
    while len(table.roots) < k:
        xn = x + _SCAN_STEP
        if xn > MAX_ARG:
            raise SolverError(
                f"bracketing failed: zero {len(table.roots) + 1} of J_{m} "
                f"not found below x={MAX_ARG}"
            )
        fn = bessel_j(m, xn)
        if fx == 0.0:
            table.roots.append(x)
        elif fx * fn < 0.0:
            lo, hi, flo = x, xn, fx
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                fm = bessel_j(m, mid)
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
                if hi - lo < 1e-13:
                    break
            table.roots.append(0.5 * (lo + hi))
        x, fx = xn, fn


def bessel_root(m: int, k: int) -> float:
    """k-th positive zero j_{m,k} of J_m (m <= 20, k <= 20)."""
    if k < 1 or k > 20:
        raise RangeError(f"root index k={k} outside supported range [1, 20]")
    _check_range(m, 0.0)
    with _cache_lock:
        table = _root_cache.setdefault(m, BesselRootTable(order=m))
        if len(table.roots) < k:
            _extend_roots(table, k)
        return table.roots[k - 1]


def root_table(m: int) -> BesselRootTable:
    """The cached root table for order m (may be empty)."""
    with _cache_lock:
        return _root_cache.setdefault(m, BesselRootTable(order=m))

"""Third- and fourth-order curvature U-statistics.

All evaluators sort the sample by Y and visit only index triples i < j < k
of the sorted sample; the ordering indicator kills every other permutation,
and ties in Y contribute nothing because the comparisons are strict.

Summation: the innermost k-loop is a plain sum (at most n terms), the
(i, j) subtotals are Kahan-compensated into a per-i partial, and the
partials are Kahan-combined in index order. The parallel variants split the
outer i-loop across threads, so serial and parallel runs give identical
bits. Zero contributions are skipped before compensation, which makes the
support-pruned paths bit-identical to the exhaustive ones for compact
(or truncated) kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numba
import numpy as np

from .data import Dataset, Pruning
from .errors import ConfigError, DataError
from .kernels import Bandwidth, KernelSpec, kernel_value

QUAD_DEFAULT_CAP = 500
SIMULATION_GRID = np.round(np.arange(-2.0, 2.0 + 1e-9, 0.25), 12)


# ---------------------------------------------------------------------------
# compiled loops


def _global_impl(ys, vs, h, code, radius, prune):
    n = ys.shape[0]
    part = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    for i in numba.prange(n - 2):
        yi = ys[i]
        vi = vs[i]
        s = 0.0
        c = 0.0
        m = 0
        for j in range(i + 1, n - 1):
            yj = ys[j]
            if not yi < yj:
                continue
            vj = vs[j]
            sub = 0.0
            for k in range(j + 1, n):
                yk = ys[k]
                if not yj < yk:
                    continue
                d = yk - 2.0 * yj + yi
                if d == 0.0:
                    continue
                u = (vs[k] - 2.0 * vj + vi) / h
                if prune and abs(u) > radius:
                    continue
                kv = kernel_value(code, radius, u)
                if kv == 0.0:
                    continue
                m += 1
                if d > 0.0:
                    sub += kv
                else:
                    sub -= kv
            if sub != 0.0:
                yy = sub - c
                t = s + yy
                c = (t - s) - yy
                s = t
        part[i] = s
        counts[i] = m
    total = 0.0
    comp = 0.0
    for i in range(n):
        if part[i] != 0.0:
            yy = part[i] - comp
            t = total + yy
            comp = (t - total) - yy
            total = t
    return total, counts.sum()


def _local_impl(ys, vs, w, h, code, radius, prune):
    """Sum over triples for every grid column of ``w`` (w[k, t] = K_hy(Y_k - y_t))."""
    n, T = w.shape
    part = np.zeros((n, T))
    for i in numba.prange(n - 2):
        yi = ys[i]
        vi = vs[i]
        s = np.zeros(T)
        c = np.zeros(T)
        sub = np.empty(T)
        for j in range(i + 1, n - 1):
            yj = ys[j]
            if not yi < yj:
                continue
            vj = vs[j]
            for t in range(T):
                sub[t] = 0.0
            for k in range(j + 1, n):
                yk = ys[k]
                if not yj < yk:
                    continue
                d = yk - 2.0 * yj + yi
                if d == 0.0:
                    continue
                u = (vs[k] - 2.0 * vj + vi) / h
                if prune and abs(u) > radius:
                    continue
                kv = kernel_value(code, radius, u)
                if kv == 0.0:
                    continue
                base = kv if d > 0.0 else -kv
                for t in range(T):
                    sub[t] += base * w[k, t]
            for t in range(T):
                term = (w[i, t] * w[j, t]) * sub[t]
                if term != 0.0:
                    yy = term - c[t]
                    tt = s[t] + yy
                    c[t] = (tt - s[t]) - yy
                    s[t] = tt
        for t in range(T):
            part[i, t] = s[t]
    out = np.zeros(T)
    for t in range(T):
        total = 0.0
        comp = 0.0
        for i in range(n):
            p = part[i, t]
            if p != 0.0:
                yy = p - comp
                tt = total + yy
                comp = (tt - total) - yy
                total = tt
        out[t] = total
    return out


def _local_window_impl(ys, vs, w, lo, hi, h, code, radius):
    """Same sums as ``_local_impl`` restricted to indices lo[t] <= i < hi[t]."""
    n, T = w.shape
    out = np.zeros(T)
    for t in numba.prange(T):
        a = lo[t]
        b = hi[t]
        total = 0.0
        comp = 0.0
        for i in range(a, b):
            yi = ys[i]
            vi = vs[i]
            s = 0.0
            c = 0.0
            for j in range(i + 1, b):
                yj = ys[j]
                if not yi < yj:
                    continue
                vj = vs[j]
                sub = 0.0
                for k in range(j + 1, b):
                    yk = ys[k]
                    if not yj < yk:
                        continue
                    d = yk - 2.0 * yj + yi
                    if d == 0.0:
                        continue
                    u = (vs[k] - 2.0 * vj + vi) / h
                    if abs(u) > radius:
                        continue
                    kv = kernel_value(code, radius, u)
                    if kv == 0.0:
                        continue
                    base = kv if d > 0.0 else -kv
                    sub += base * w[k, t]
                term = (w[i, t] * w[j, t]) * sub
                if term != 0.0:
                    yy = term - c
                    tt = s + yy
                    c = (tt - s) - yy
                    s = tt
            if s != 0.0:
                yy = s - comp
                tt = total + yy
                comp = (tt - total) - yy
                total = tt
        out[t] = total
    return out


def _quad_impl(ys, vs, h, code, radius):
    n = ys.shape[0]
    part = np.zeros(n)
    for i in numba.prange(n - 3):
        yi = ys[i]
        vi = vs[i]
        s = 0.0
        c = 0.0
        for j in range(i + 1, n - 2):
            yj = ys[j]
            if not yi < yj:
                continue
            vj = vs[j]
            for k in range(j + 1, n - 1):
                yk = ys[k]
                if not yj < yk:
                    continue
                vk = vs[k]
                sub = 0.0
                for m in range(k + 1, n):
                    ym = ys[m]
                    if not yk < ym:
                        continue
                    d = ym - yk - yj + yi
                    if d == 0.0:
                        continue
                    kv = kernel_value(code, radius, (vs[m] - vk - vj + vi) / h)
                    if kv == 0.0:
                        continue
                    if d > 0.0:
                        sub += kv
                    else:
                        sub -= kv
                if sub != 0.0:
                    yy = sub - c
                    tt = s + yy
                    c = (tt - s) - yy
                    s = tt
        part[i] = s
    total = 0.0
    comp = 0.0
    for i in range(n):
        if part[i] != 0.0:
            yy = part[i] - comp
            tt = total + yy
            comp = (tt - total) - yy
            total = tt
    return total


_serial = dict(cache=True, nogil=True)
_par = dict(cache=True, parallel=True)
_global_serial = numba.njit(**_serial)(_global_impl)
_global_parallel = numba.njit(**_par)(_global_impl)
_local_serial = numba.njit(**_serial)(_local_impl)
_local_parallel = numba.njit(**_par)(_local_impl)
_window_serial = numba.njit(**_serial)(_local_window_impl)
_window_parallel = numba.njit(**_par)(_local_window_impl)
_quad_serial = numba.njit(**_serial)(_quad_impl)
_quad_parallel = numba.njit(**_par)(_quad_impl)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class GlobalStat:
    u_n: float
    s_n: float
    n_triples_contributing: int
    h_x: float
    n: int


@dataclass(frozen=True)
class LocalStatCurve:
    grid: np.ndarray
    values: np.ndarray  # sqrt(n h_y) U_n(y) at each grid point
    u_values: np.ndarray
    h_x: float
    h_y: float
    n: int

    @property
    def aggregate_inf(self) -> float:
        return float(np.min(self.values))

    @property
    def aggregate_sup(self) -> float:
        return float(np.max(self.values))

    @property
    def aggregate_sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def aggregate(self, how: str) -> float:
        return {"inf": self.aggregate_inf, "sup": self.aggregate_sup,
                "sup_abs": self.aggregate_sup_abs}[how]

    def to_dict(self) -> dict:
        return {
            "grid": [float(g) for g in self.grid],
            "values": [float(v) for v in self.values],
            "aggregate_inf": self.aggregate_inf,
            "aggregate_sup": self.aggregate_sup,
            "aggregate_sup_abs": self.aggregate_sup_abs,
        }


# ---------------------------------------------------------------------------
# array-level entry points (used by the bootstrap)


def _h(value) -> float:
    h = float(value)
    if not (math.isfinite(h) and h > 0):
        raise ConfigError(f"bandwidth must be positive, got {value!r}")
    return h


def _sorted(y, index):
    y = np.asarray(y, dtype=float)
    index = np.asarray(index, dtype=float)
    if y.shape[0] < 3:
        raise DataError(f"need at least 3 observations, got {y.shape[0]}")
    order = np.argsort(y, kind="stable")
    return np.ascontiguousarray(y[order]), np.ascontiguousarray(index[order])


def _n3(n):
    return float(n) * (n - 1) * (n - 2)


def global_from_index(y, index, spec: KernelSpec, h_x, prune: bool = False,
                      parallel: bool = False):
    """Return ``(U_n, n_contributing)`` for outcomes ``y`` and index values ``X'beta``."""
    h = _h(h_x)
    ys, vs = _sorted(y, index)
    fn = _global_parallel if parallel else _global_serial
    total, count = fn(ys, vs, h, spec.code, spec.radius, bool(prune and spec.compact))
    return total / (h * _n3(ys.size)), int(count)


def y_weights(ys, grid, spec: KernelSpec, h_y):
    u = (ys[:, None] - np.asarray(grid, dtype=float)[None, :]) / h_y
    from .kernels import _vec_value
    return np.ascontiguousarray(_vec_value(spec.code, spec.radius, u) / h_y)


def local_from_index(y, index, spec: KernelSpec, h_x, h_y, grid, prune: bool = False,
                     parallel: bool = False):
    """U_n(y) at every grid point (unscaled)."""
    hx, hy = _h(h_x), _h(h_y)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ConfigError("grid must be nonempty")
    if not np.all(np.isfinite(grid)):
        raise ConfigError("grid must be finite")
    ys, vs = _sorted(y, index)
    w = y_weights(ys, grid, spec, hy)
    if prune and spec.compact:
        reach = hy * spec.radius
        lo = np.searchsorted(ys, grid - reach, side="left").astype(np.int64)
        hi = np.searchsorted(ys, grid + reach, side="right").astype(np.int64)
        fn = _window_parallel if parallel else _window_serial
        total = fn(ys, vs, w, lo, hi, hx, spec.code, spec.radius)
    else:
        fn = _local_parallel if parallel else _local_serial
        total = fn(ys, vs, w, hx, spec.code, spec.radius, False)
    return total / (hx * _n3(ys.size))


def quad_from_index(y, index, spec: KernelSpec, h_x, parallel: bool = False):
    h = _h(h_x)
    ys, vs = _sorted(y, index)
    n = ys.size
    if n < 4:
        raise DataError(f"the fourth-order statistic needs n >= 4, got {n}")
    fn = _quad_parallel if parallel else _quad_serial
    total = fn(ys, vs, h, spec.code, spec.radius)
    return math.sqrt(n) * total / (h * float(n) * (n - 1) * (n - 2) * (n - 3))


# ---------------------------------------------------------------------------
# Dataset-level API


def _index(data: Dataset, beta) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.size != data.q:
        raise DataError(f"beta has {beta.size} entries, x has {data.q} columns")
    return data.x @ beta


def _prune(mode) -> bool:
    return Pruning(mode) is Pruning.PRUNE


def global_u_stat(data: Dataset, beta, spec: KernelSpec, h_x: Union[Bandwidth, float],
                  mode: Union[str, Pruning] = Pruning.EXACT, parallel: bool = False) -> GlobalStat:
    u, count = global_from_index(data.y, _index(data, beta), spec, h_x, _prune(mode), parallel)
    return GlobalStat(u, math.sqrt(data.n) * u, count, float(h_x), data.n)


def global_statistic(data: Dataset, beta, spec: KernelSpec, h_x,
                     mode=Pruning.EXACT, parallel: bool = False) -> GlobalStat:
    """S_n = sqrt(n) U_n; same as :func:`global_u_stat`, kept as the test-facing name."""
    return global_u_stat(data, beta, spec, h_x, mode, parallel)


def local_u_stat(data: Dataset, beta, spec: KernelSpec, h_x, h_y, y: float,
                 mode=Pruning.EXACT) -> float:
    return float(local_from_index(data.y, _index(data, beta), spec, h_x, h_y, [y],
                                  _prune(mode))[0])


def local_statistics(data: Dataset, beta, spec: KernelSpec, h_x, h_y, grid,
                     mode=Pruning.EXACT, parallel: bool = False) -> LocalStatCurve:
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ConfigError("grid must be nonempty")
    if np.any(np.diff(grid) < 0):
        raise ConfigError("grid must be sorted")
    u = local_from_index(data.y, _index(data, beta), spec, h_x, h_y, grid, _prune(mode), parallel)
    vals = math.sqrt(data.n * float(h_y)) * u
    return LocalStatCurve(grid, vals, u, float(h_x), float(h_y), data.n)


def global_u_stat_quad(data: Dataset, beta, spec: KernelSpec, h_x,
                       cap: Optional[int] = QUAD_DEFAULT_CAP, parallel: bool = False) -> float:
    """The fourth-order statistic (already multiplied by sqrt(n)); O(n^4)."""
    if data.n < 4:
        raise DataError(f"the fourth-order statistic needs n >= 4, got {data.n}")
    if cap is not None and data.n > cap:
        raise ConfigError(f"n={data.n} exceeds the quadruple-enumeration cap {cap}; "
                          "pass cap=None to override")
    return quad_from_index(data.y, _index(data, beta), spec, h_x, parallel)


def default_grid(y, points: int = 17) -> np.ndarray:
    """Equally spaced points between the 5% and 95% sample quantiles."""
    lo, hi = np.quantile(np.asarray(y, dtype=float), [0.05, 0.95])
    return np.linspace(lo, hi, points)

"""Kernel functions, rule-of-thumb bandwidths and the kernel positivity check.

Kernels are identified by an integer code so the scalar evaluators can be
called from numba-compiled loops. ``radius`` is the support radius: 1 for the
compact kernels, the truncation radius (or +inf) for the Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .errors import ConfigError, DataError, NumericalError

GAUSSIAN, EPANECHNIKOV, BIWEIGHT = 0, 1, 2
FAMILIES = {"gaussian": GAUSSIAN, "epanechnikov": EPANECHNIKOV, "biweight": BIWEIGHT}
ORDERS = ("value", "d1", "d2", "antiderivative")

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INV_SQRT_2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class KernelSpec:
    family: str = "gaussian"
    truncation_radius: Optional[float] = None

    def __post_init__(self):
        fam = str(self.family).lower()
        if fam not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        r = self.truncation_radius
        if r is not None:
            if fam != "gaussian":
                raise ConfigError("truncation_radius only applies to the Gaussian kernel")
            if not (np.isfinite(r) and r > 0):
                raise ConfigError("truncation_radius must be positive and finite")

    @property
    def code(self) -> int:
        return FAMILIES[self.family]

    @property
    def radius(self) -> float:
        if self.family != "gaussian":
            return 1.0
        return math.inf if self.truncation_radius is None else float(self.truncation_radius)

    @property
    def compact(self) -> bool:
        return math.isfinite(self.radius)

    @property
    def peak(self) -> float:
        return float(kernel_value(self.code, self.radius, 0.0))


@numba.njit(cache=True, nogil=True)
def kernel_value(code, radius, u):
    a = abs(u)
    if a > radius:
        return 0.0
    if code == GAUSSIAN:
        return _INV_SQRT_2PI * math.exp(-0.5 * u * u)
    w = 1.0 - u * u
    if code == EPANECHNIKOV:
        return 0.75 * w
    return 0.9375 * w * w


@numba.njit(cache=True, nogil=True)
def kernel_d1(code, radius, u):
    if abs(u) > radius:
        return 0.0
    if code == GAUSSIAN:
        return -u * _INV_SQRT_2PI * math.exp(-0.5 * u * u)
    if code == EPANECHNIKOV:
        return -1.5 * u
    return -3.75 * u * (1.0 - u * u)


@numba.njit(cache=True, nogil=True)
def kernel_d2(code, radius, u):
    if abs(u) > radius:
        return 0.0
    if code == GAUSSIAN:
        return (u * u - 1.0) * _INV_SQRT_2PI * math.exp(-0.5 * u * u)
    if code == EPANECHNIKOV:
        return -1.5
    return -3.75 * (1.0 - 3.0 * u * u)


@numba.njit(cache=True, nogil=True)
def _normal_cdf(u):
    return 0.5 * math.erfc(-u * _INV_SQRT_2)


@numba.njit(cache=True, nogil=True)
def kernel_antiderivative(code, radius, u):
    """Integral of K from -inf to u."""
    if code == GAUSSIAN:
        if radius == math.inf:
            return _normal_cdf(u)
        lo = _normal_cdf(-radius)
        if u <= -radius:
            return 0.0
        if u >= radius:
            return _normal_cdf(radius) - lo
        return _normal_cdf(u) - lo
    if u <= -1.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    if code == EPANECHNIKOV:
        return 0.5 + 0.75 * u - 0.25 * u * u * u
    u2 = u * u
    return 0.5 + 0.9375 * u * (1.0 - 2.0 * u2 / 3.0 + u2 * u2 / 5.0)


@numba.vectorize(["f8(i8, f8, f8)"], cache=True)
def _vec_value(code, radius, u):
    return kernel_value(code, radius, u)


@numba.vectorize(["f8(i8, f8, f8)"], cache=True)
def _vec_d1(code, radius, u):
    return kernel_d1(code, radius, u)


@numba.vectorize(["f8(i8, f8, f8)"], cache=True)
def _vec_d2(code, radius, u):
    return kernel_d2(code, radius, u)


@numba.vectorize(["f8(i8, f8, f8)"], cache=True)
def _vec_anti(code, radius, u):
    return kernel_antiderivative(code, radius, u)


_VEC = {"value": _vec_value, "d1": _vec_d1, "d2": _vec_d2, "antiderivative": _vec_anti}


def kernel_eval(spec: KernelSpec, order: str, u):
    """Evaluate K, K', K'' or the antiderivative at ``u`` (scalar or array)."""
    try:
        fn = _VEC[order]
    except KeyError:
        raise ConfigError(f"unknown kernel order {order!r}; expected one of {ORDERS}") from None
    out = fn(spec.code, spec.radius, np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def scaled_kernel(spec: KernelSpec, u, h: float):
    """K_h(u) = K(u / h) / h."""
    return kernel_eval(spec, "value", np.asarray(u, dtype=float) / h) / h


# ---------------------------------------------------------------------------
# bandwidths


@dataclass(frozen=True)
class Bandwidth:
    value: float
    rule: str = "manual"  # "rule_of_thumb" or "manual"

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value > 0):
            raise ConfigError(f"bandwidth must be positive and finite, got {self.value}")

    def __float__(self):
        return float(self.value)


def rot_value(sd: float, n: int) -> float:
    return 1.06 * sd * n ** (-0.2)


def bandwidth_rot(values) -> Bandwidth:
    """Rule of thumb ``1.06 * sd * n**(-1/5)`` with the n-1 denominator."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise DataError("rule-of-thumb bandwidth needs at least two values")
    sd = float(np.std(v, ddof=1))
    if not sd > 0:
        raise NumericalError("degenerate bandwidth: values have zero variance")
    return Bandwidth(rot_value(sd, v.size), "rule_of_thumb")


def index_spacing_sd(index) -> float:
    """Sample sd of ``v_i - 2 v_j + v_k`` over all ordered distinct triples.

    The population of second differences has mean zero and second moment
    ``6 * s**2`` (``s**2`` the n-1 variance of ``index``), so the full
    O(n^3) population is summarized in O(n).
    """
    v = np.asarray(index, dtype=float)
    n = v.size
    if n < 3:
        raise DataError("need at least three index values")
    s2 = float(np.var(v, ddof=1))
    n_triples = n * (n - 1) * (n - 2)
    return math.sqrt(6.0 * s2 * n_triples / (n_triples - 1))


def index_bandwidth(index) -> Bandwidth:
    """Rule-of-thumb bandwidth for the kernel argument ``(X_kj - X_ji)'beta``."""
    sd = index_spacing_sd(index)
    if not sd > 0:
        raise NumericalError("degenerate bandwidth: index has zero variance")
    return Bandwidth(rot_value(sd, np.size(index)), "rule_of_thumb")


# ---------------------------------------------------------------------------
# kernel positivity condition

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class ConditionIntegral:
    value: float
    positive: bool
    abs_error: float
    levels: int
    domain: str


def _condition_integrand(spec: KernelSpec, s1, s2):
    c, r = spec.code, spec.radius
    k1 = _vec_value(c, r, s1)
    k2 = _vec_value(c, r, s2)
    bracket = _vec_anti(c, r, 2.0 * s1 - s2) + 2.0 * _vec_anti(c, r, 2.0 * s2 - s1)
    return k1 * k2 * bracket * s1


def _tensor_gauss_legendre(f, lo, hi, panels):
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    total = 0.0
    # one row block of s1 at a time keeps memory bounded
    block = max(1, 2**20 // nodes.size)
    for start in range(0, nodes.size, block):
        s1 = nodes[start:start + block, None]
        vals = f(s1, nodes[None, :])
        total += float(weights[start:start + block] @ (vals @ weights))
    return total


def kernel_condition_integral(spec: KernelSpec, domain: str = "unit_square",
                              tol: float = 1e-6, max_level: int = 6,
                              gaussian_cutoff: float = 12.0) -> ConditionIntegral:
    """Double integral of K(s1) K(s2) [A(2 s1 - s2) + 2 A(2 s2 - s1)] s1, A = antiderivative.

    ``domain="unit_square"`` integrates over [-1, 1]^2, the support the
    condition is stated for; for the compact kernels this is the whole
    plane. ``domain="full"`` integrates the Gaussian over the plane (cut at
    ``gaussian_cutoff``), where the value is exactly zero by Stein's identity.

    Tensor Gauss-Legendre with 64 nodes per panel; panels are bisected until
    successive estimates agree to ``tol``.
    """
    if domain == "unit_square":
        lim = 1.0
    elif domain == "full":
        lim = min(spec.radius, gaussian_cutoff)
    else:
        raise ConfigError(f"unknown integration domain {domain!r}")
    f = lambda a, b: _condition_integrand(spec, a, b)  # noqa: E731
    prev = _tensor_gauss_legendre(f, -lim, lim, 1)
    for level in range(1, max_level + 1):
        cur = _tensor_gauss_legendre(f, -lim, lim, 2**level)
        err = abs(cur - prev)
        if err < tol:
            return ConditionIntegral(cur, bool(cur > 0), err, level, domain)
        prev = cur
    raise NumericalError(
        f"condition integral did not converge: last change {err:.3g} > {tol:.3g}"
    )

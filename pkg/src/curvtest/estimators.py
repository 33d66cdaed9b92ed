"""Estimators for the index coefficients: OLS and maximum rank correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .data import Dataset, EstimatedModel
from .errors import DataError, SingularDesignError

COND_LIMIT = 1e12


def _check_rank(design: np.ndarray, offset: int):
    if np.linalg.matrix_rank(design) < design.shape[1]:
        # report the first column that is a combination of the earlier ones
        for c in range(1, design.shape[1] + 1):
            if np.linalg.matrix_rank(design[:, :c]) < c:
                raise SingularDesignError(
                    f"singular design: column {c - 1 - offset} is linearly dependent",
                    column=c - 1 - offset,
                )
    cond = np.linalg.cond(design)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularDesignError(f"design is numerically singular (condition number {cond:.3g})")


def ols_fit(data: Dataset, intercept: bool = False) -> EstimatedModel:
    x = data.x
    design = np.column_stack([np.ones(data.n), x]) if intercept else x
    _check_rank(design, 1 if intercept else 0)
    coef, *_ = np.linalg.lstsq(design, data.y, rcond=None)
    if intercept:
        a, beta = float(coef[0]), coef[1:]
    else:
        a, beta = 0.0, coef
    index = x @ beta
    residuals = data.y - a - index
    return EstimatedModel(beta=beta, intercept=a, residuals=residuals, index=index)


def model_from_beta(data: Dataset, beta, intercept: bool = False) -> EstimatedModel:
    """Residuals for a fixed ``beta``; the intercept (if any) is the residual mean."""
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != data.q:
        raise DataError(f"beta has {beta.size} entries, x has {data.q} columns")
    index = data.x @ beta
    a = float(np.mean(data.y - index)) if intercept else 0.0
    return EstimatedModel(beta=beta, intercept=a, residuals=data.y - a - index, index=index)


def normalize_scale(data: Dataset, model: EstimatedModel,
                    intercept: bool = False) -> EstimatedModel:
    """Rescale ``beta`` so that ``|beta_1| = 1`` and recompute the residuals.

    The index is only identified up to scale; the bootstrap draws
    ``Y* = X'beta + e*`` on the normalized scale.
    """
    b1 = abs(float(model.beta[0]))
    if not b1 > 0:
        raise SingularDesignError("cannot normalize: first coefficient is zero", column=0)
    return model_from_beta(data, model.beta / b1, intercept)


# ---------------------------------------------------------------------------
# maximum rank correlation


@numba.njit(cache=True, nogil=True)
def _concordant_pairs(y, v):
    n = y.shape[0]
    q = 0
    for i in range(n):
        for j in range(n):
            if y[i] > y[j] and v[i] > v[j]:
                q += 1
    return q


def mrc_objective(data: Dataset, beta) -> int:
    """Number of ordered pairs with ``Y_i > Y_j`` and ``X_i'b > X_j'b``."""
    v = data.x @ np.asarray(beta, dtype=float)
    return int(_concordant_pairs(data.y, v))


@dataclass(frozen=True)
class MRCOptions:
    multistarts: int = 4
    refine_iters: int = 3
    scan_points: int = 41
    golden_iters: int = 30
    width: float = 5.0
    seed: int = 0


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _line_max(obj, beta, k, lo, hi, opts):
    """Grid scan then golden-section refinement along coordinate ``k``.

    Ties keep the earliest point visited, so the search is deterministic.
    """
    def at(t):
        b = beta.copy()
        b[k] = t
        return obj(b)

    grid = np.linspace(lo, hi, opts.scan_points)
    vals = [at(t) for t in grid]
    best = int(np.argmax(vals))
    best_t, best_q = grid[best], vals[best]
    step = grid[1] - grid[0]
    a, b = best_t - step, best_t + step
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = at(c), at(d)
    for _ in range(opts.golden_iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = at(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = at(d)
        for t, f in ((c, fc), (d, fd)):
            if f > best_q:
                best_t, best_q = t, f
    out = beta.copy()
    out[k] = best_t
    return out, best_q


def mrc_fit(data: Dataset, opts: MRCOptions = MRCOptions()) -> EstimatedModel:
    """Maximum rank correlation under the normalization ``|beta_1| = 1``.

    For each sign of the first coefficient the remaining coordinates are
    improved by coordinate sweeps (scan + golden section) from several
    starts: the OLS direction, the origin and seeded random points. The
    window shrinks by half on each refinement pass. Among equal objective
    values the first maximizer found wins.
    """
    if np.unique(data.y).size < 2:
        raise DataError("degenerate MRC objective: all outcomes are tied")
    q = data.q
    obj = lambda b: mrc_objective(data, b)  # noqa: E731
    if q == 1:
        cands = [np.array([1.0]), np.array([-1.0])]
        scores = [obj(b) for b in cands]
        beta = cands[int(np.argmax(scores))]
        return _linear_model(data, beta)

    try:
        b_ols = np.linalg.lstsq(data.x, data.y, rcond=None)[0]
    except np.linalg.LinAlgError:
        b_ols = np.zeros(q)
    rng = np.random.default_rng(opts.seed)
    best_beta, best_q = None, -1
    for sign in (1.0, -1.0):
        starts = []
        if b_ols[0] != 0:
            starts.append(b_ols[1:] / abs(b_ols[0]) * sign * np.sign(b_ols[0]))
        starts.append(np.zeros(q - 1))
        while len(starts) < opts.multistarts:
            starts.append(rng.uniform(-opts.width, opts.width, q - 1))
        for st in starts[: max(1, opts.multistarts)]:
            beta = np.concatenate([[sign], st])
            cur_q = obj(beta)
            width = opts.width
            for _ in range(opts.refine_iters):
                for k in range(1, q):
                    beta, cur_q = _line_max(obj, beta, k, beta[k] - width, beta[k] + width, opts)
                width /= 2.0
            if cur_q > best_q:
                best_beta, best_q = beta, cur_q
    return _linear_model(data, best_beta)


def _linear_model(data, beta):
    beta = np.asarray(beta, dtype=float)
    index = data.x @ beta
    return EstimatedModel(beta=beta, intercept=0.0, residuals=data.y - index, index=index)

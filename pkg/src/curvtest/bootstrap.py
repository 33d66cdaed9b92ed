"""Bootstrap critical values and the end-to-end test pipeline.

Bootstrap samples are generated under the linear null:
``Y* = a + X beta_hat + e*`` with ``e*`` either sign-flipped residuals (wild,
two-point multipliers) or residuals drawn with replacement. ``beta`` is
re-estimated on each bootstrap sample. Bandwidths and the local grid are held
at their original-sample values by default (``bootstrap_bandwidths="frozen"``);
``"recompute"`` re-applies the rule of thumb to every bootstrap sample, which
lets heavy-tailed outcomes inject bandwidth noise into the replicates.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import (Dataset, Decision, EstimatedModel, Estimator, Flavor, Hypothesis,
                   Pruning, Scheme, TestConfig, TestReport)
from .errors import ConfigError, CurvtestError, NumericalError
from .estimators import MRCOptions, model_from_beta, mrc_fit, normalize_scale, ols_fit
from .kernels import KernelSpec, bandwidth_rot, index_bandwidth
from .ustats import (GlobalStat, LocalStatCurve, default_grid, global_from_index,
                     local_from_index)

MAX_CONSECUTIVE_FAILURES = 10


def replicate_rng(seed: int, b: int) -> np.random.Generator:
    """Independent stream for replication ``b``; does not depend on execution order."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(b),)))


def wild_multipliers(rng: np.random.Generator, n: int) -> np.ndarray:
    return 2.0 * rng.integers(0, 2, size=n) - 1.0


def draw_errors(rng: np.random.Generator, residuals: np.ndarray, scheme: Scheme) -> np.ndarray:
    n = residuals.shape[0]
    if scheme is Scheme.WILD:
        return wild_multipliers(rng, n) * residuals
    return residuals[rng.integers(0, n, size=n)]


def empirical_quantile(stats, alpha: float) -> float:
    """Lower empirical quantile: the ceil(alpha * B)-th order statistic."""
    s = np.sort(np.asarray(stats, dtype=float))
    k = math.ceil(alpha * s.size - 1e-9)
    return float(s[min(max(k, 1), s.size) - 1])


# ---------------------------------------------------------------------------
# pieces of the pipeline


def kernel_of(config: TestConfig) -> KernelSpec:
    return KernelSpec(config.kernel, config.truncation_radius)


def fit(data: Dataset, config: TestConfig) -> EstimatedModel:
    if config.fixed_beta is not None:
        return model_from_beta(data, config.fixed_beta, config.intercept)
    if config.estimator is Estimator.MRC:
        return mrc_fit(data, MRCOptions(multistarts=config.mrc_multistarts,
                                        refine_iters=config.mrc_refine_iters))
    model = ols_fit(data, intercept=config.intercept)
    if config.normalize:
        model = normalize_scale(data, model, config.intercept)
    return model


def bandwidths(y, index, config: TestConfig):
    hx = float(config.h_x) if config.h_x != "auto" else index_bandwidth(index).value
    hy = None
    if config.flavor is Flavor.LOCAL:
        hy = float(config.h_y) if config.h_y != "auto" else bandwidth_rot(y).value
    return hx, hy


def resolve_grid(data: Dataset, config: TestConfig) -> Optional[np.ndarray]:
    if config.flavor is not Flavor.LOCAL:
        return None
    if isinstance(config.grid, str):
        if config.grid != "auto":
            raise ConfigError(f"grid must be 'auto' or a list of points, got {config.grid!r}")
        return default_grid(data.y)
    grid = np.asarray(config.grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) < 0) or not np.all(np.isfinite(grid)):
        raise ConfigError("grid must be a nonempty, sorted, finite list")
    return grid


def aggregation(config: TestConfig) -> Optional[str]:
    """How the local curve is reduced to a scalar for this hypothesis."""
    if config.flavor is Flavor.GLOBAL:
        return None
    if config.hypothesis is Hypothesis.CONCAVE:
        return "inf"
    if config.hypothesis is Hypothesis.CONVEX:
        return "sup"
    return "sup_abs" if config.local_linear_rule == "sup_abs" else "inf"


def statistic(y, model_index, config: TestConfig, grid, h_x, h_y, parallel=False):
    """Scalar test statistic plus the full GlobalStat / LocalStatCurve."""
    spec = kernel_of(config)
    prune = config.pruning is Pruning.PRUNE
    n = len(y)
    if config.flavor is Flavor.GLOBAL:
        u, count = global_from_index(y, model_index, spec, h_x, prune, parallel)
        gs = GlobalStat(u, math.sqrt(n) * u, count, h_x, n)
        return gs.s_n, gs
    u = local_from_index(y, model_index, spec, h_x, h_y, grid, prune, parallel)
    curve = LocalStatCurve(np.asarray(grid, float), math.sqrt(n * h_y) * u, u, h_x, h_y, n)
    return curve.aggregate(aggregation(config)), curve


# ---------------------------------------------------------------------------
# bootstrap


@dataclass
class BootstrapResult:
    replicate_stats: np.ndarray
    quantiles: dict
    scheme: Scheme
    seed: int
    redraws: int = 0

    def quantile(self, alpha: float) -> float:
        return empirical_quantile(self.replicate_stats, alpha)


def quantile_levels(level: float) -> list:
    return sorted({level / 2, level, 1 - level, 1 - level / 2, 0.05, 0.10, 0.90, 0.95})


def _one_replicate(data, model, config, grid, b, frozen=None):
    rng = replicate_rng(config.seed, b)
    fails = 0
    while True:
        e = draw_errors(rng, model.residuals, config.scheme)
        y_star = model.fitted + e
        try:
            if np.unique(y_star).size < 3:
                raise NumericalError("bootstrap outcomes are (nearly) all tied")
            boot = Dataset(y=y_star, x=data.x)
            m_star = fit(boot, config)
            if frozen is None:
                hx, hy = bandwidths(y_star, m_star.index, config)
            else:
                hx, hy = frozen
            value, _ = statistic(y_star, m_star.index, config, grid, hx, hy)
            if not math.isfinite(value):
                raise NumericalError("non-finite bootstrap statistic")
            return value, fails
        except CurvtestError as exc:
            fails += 1
            if fails >= MAX_CONSECUTIVE_FAILURES:
                raise NumericalError(
                    f"bootstrap replication {b} failed {fails} times in a row: {exc}"
                ) from exc


def bootstrap_distribution(data: Dataset, config: TestConfig,
                           model: Optional[EstimatedModel] = None,
                           grid=None, threads: Optional[int] = None,
                           frozen_bandwidths=None) -> BootstrapResult:
    """Draw ``config.n_bootstrap`` statistics under the linear null.

    Replication ``b`` uses its own stream derived from ``(seed, b)``, so the
    result does not depend on ``threads``.
    """
    config.validate()
    if model is None:
        model = fit(data, config)
    if grid is None:
        grid = resolve_grid(data, config)
    threads = config.threads if threads is None else threads
    B = int(config.n_bootstrap)
    if config.bootstrap_bandwidths != "frozen":
        frozen_bandwidths = None
    elif frozen_bandwidths is None:
        frozen_bandwidths = bandwidths(data.y, model.index, config)
    run = lambda b: _one_replicate(data, model, config, grid, b, frozen_bandwidths)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, range(B)))
    else:
        results = [run(b) for b in range(B)]
    stats = np.array([r[0] for r in results])
    redraws = sum(r[1] for r in results)
    qs = {a: empirical_quantile(stats, a) for a in quantile_levels(config.level)}
    return BootstrapResult(stats, qs, config.scheme, int(config.seed), redraws)


# ---------------------------------------------------------------------------
# decisions


def critical_value(boot_quantile, hypothesis: Hypothesis, flavor: Flavor, level: float,
                   local_linear_rule: str = "sup_abs") -> float:
    """Linearity is two-sided on the signed replicates, except for the local
    sup-abs statistic, which is already an absolute value."""
    if hypothesis is Hypothesis.CONCAVE:
        return boot_quantile(level)
    if hypothesis is Hypothesis.CONVEX:
        return boot_quantile(1 - level)
    if flavor is Flavor.LOCAL and local_linear_rule == "sup_abs":
        return boot_quantile(1 - level)
    return boot_quantile(1 - level / 2)


def reject(value: float, crit: float, hypothesis: Hypothesis, flavor: Flavor,
           local_linear_rule: str = "sup_abs") -> bool:
    if hypothesis is Hypothesis.CONCAVE:
        return value < crit
    if hypothesis is Hypothesis.CONVEX:
        return value > crit
    if flavor is Flavor.LOCAL and local_linear_rule == "sup_abs":
        return value > crit
    return abs(value) > crit


def decide(stat, boot: BootstrapResult, hypothesis, level: float,
           local_linear_rule: str = "sup_abs"):
    """Return ``(statistic, critical_value, Decision)``.

    ``stat`` is a :class:`GlobalStat` or :class:`LocalStatCurve`; the
    bootstrap replicates must have been aggregated the same way.
    """
    if not (0 < level <= 0.5):
        raise ConfigError(f"level must lie in (0, 0.5], got {level}")
    hypothesis = Hypothesis.parse(hypothesis)
    if isinstance(stat, GlobalStat):
        flavor, value = Flavor.GLOBAL, stat.s_n
    elif isinstance(stat, LocalStatCurve):
        flavor = Flavor.LOCAL
        how = {"concave": "inf", "convex": "sup"}.get(
            hypothesis.value, "sup_abs" if local_linear_rule == "sup_abs" else "inf")
        value = stat.aggregate(how)
    else:
        raise ConfigError(f"cannot decide on a {type(stat).__name__}")
    crit = critical_value(boot.quantile, hypothesis, flavor, level, local_linear_rule)
    rej = reject(value, crit, hypothesis, flavor, local_linear_rule)
    return value, crit, Decision.REJECT if rej else Decision.FAIL_TO_REJECT


def rederive_decision(report: dict, local_linear_rule: str = "sup_abs") -> Decision:
    """Recompute the decision from a serialized report's statistic and quantiles."""
    qs = {float(k): v for k, v in report["bootstrap_quantiles"].items()}
    hyp = Hypothesis.parse(report["hypothesis"])
    flavor = Flavor(report["flavor"])
    lvl = report["level"]
    lookup = lambda a: qs[min(qs, key=lambda k: abs(k - a))]  # noqa: E731
    crit = critical_value(lookup, hyp, flavor, lvl, local_linear_rule)
    rej = reject(report["statistic"], crit, hyp, flavor, local_linear_rule)
    return Decision.REJECT if rej else Decision.FAIL_TO_REJECT


# ---------------------------------------------------------------------------
# pipeline


def run_test(data: Dataset, config: TestConfig, keep_replicates: bool = True) -> TestReport:
    """Estimate, compute the statistic, bootstrap and decide."""
    t0 = time.perf_counter()
    config.validate()
    model = fit(data, config)
    grid = resolve_grid(data, config)
    hx, hy = bandwidths(data.y, model.index, config)
    value, stat = statistic(data.y, model.index, config, grid, hx, hy,
                            parallel=config.threads > 1)
    boot = bootstrap_distribution(data, config, model, grid,
                                  frozen_bandwidths=(hx, hy))
    rule = config.local_linear_rule
    crit = critical_value(boot.quantile, config.hypothesis, config.flavor, config.level, rule)
    rej = reject(value, crit, config.hypothesis, config.flavor, rule)
    warnings = []
    if data.ties_warning:
        warnings.append(f"tie fraction {data.tie_fraction:.3f} exceeds 0.10; "
                        "the statistic assumes continuous outcomes")
    if boot.redraws:
        warnings.append(f"{boot.redraws} degenerate bootstrap draws were redrawn")
    curve = None
    if isinstance(stat, LocalStatCurve):
        curve = stat.to_dict()
        n = data.n
        curve["aggregate"] = value
        curve["aggregate_times_n3"] = value * n * (n - 1) * (n - 2)
    return TestReport(
        hypothesis=config.hypothesis,
        flavor=config.flavor,
        statistic=float(value),
        bootstrap_quantiles=boot.quantiles,
        critical_value=float(crit),
        decision=Decision.REJECT if rej else Decision.FAIL_TO_REJECT,
        beta_hat=np.asarray(model.beta, dtype=float),
        h_x_used=float(hx),
        h_y_used=None if hy is None else float(hy),
        tie_fraction=data.tie_fraction,
        runtime_ms=int(round(1000 * (time.perf_counter() - t0))),
        n=data.n,
        level=config.level,
        curve=curve,
        replicate_stats=boot.replicate_stats if keep_replicates else None,
        warnings=warnings,
    )

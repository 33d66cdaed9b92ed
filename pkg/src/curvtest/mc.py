"""Monte Carlo designs D0-D4 and rejection-frequency tables.

Every design is ``T(Y) = X + e`` with scalar standard-normal ``X`` and
``T(0) = 0``; data are generated as ``Y = T^{-1}(X + e)``.
"""

from __future__ import annotations

import dataclasses
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bootstrap import run_test
from .data import Dataset, Flavor, TestConfig, validate_dataset
from .errors import ConfigError, CurvtestError
from .ustats import SIMULATION_GRID

DESIGNS = ("D0", "D1", "D2", "D3", "D4")
ERRORS = ("normal", "gumbel")
D4_BOUND = 5.0 - 1e-9
EULER_GAMMA = 0.5772156649015329


def transform(design: str, y):
    """The design's transformation T."""
    y = np.asarray(y, dtype=float)
    if design == "D0":
        return y.copy()
    if design == "D1":
        return np.log(y + 2.12) - math.log(2.12)
    if design == "D2":
        return np.sinh(2.0 * y) / 13.0
    if design == "D3":
        return math.log(2.12) - np.log(2.12 - y)
    if design == "D4":
        return 5.0 * np.tanh(0.5 * y)
    raise ConfigError(f"unknown design {design!r}")


def inverse_transform(design: str, z):
    """T^{-1}; for D4 only |z| < 5 is in the domain."""
    z = np.asarray(z, dtype=float)
    if design == "D0":
        return z.copy()
    if design == "D1":
        return 2.12 * np.expm1(z)
    if design == "D2":
        return np.arcsinh(13.0 * z) / 2.0
    if design == "D3":
        return -2.12 * np.expm1(-z)
    if design == "D4":
        return 2.0 * np.arctanh(z / 5.0)
    raise ConfigError(f"unknown design {design!r}")


@dataclass(frozen=True)
class McDesign:
    id: str = "D0"
    error_dist: str = "normal"
    n: int = 100

    def __post_init__(self):
        if self.id not in DESIGNS:
            raise ConfigError(f"unknown design {self.id!r}; expected one of {DESIGNS}")
        if self.error_dist not in ERRORS:
            raise ConfigError(f"unknown error distribution {self.error_dist!r}")
        if self.n < 3:
            raise ConfigError("n must be at least 3")


def draw_errors(rng: np.random.Generator, dist: str, size: int) -> np.ndarray:
    if dist == "normal":
        return rng.standard_normal(size)
    # standard Gumbel shifted to mean zero
    return rng.gumbel(0.0, 1.0, size) - EULER_GAMMA


def generate_design(design: McDesign, rng) -> Dataset:
    """One sample from ``design``. ``rng`` is a Generator or a seed."""
    rng = np.random.default_rng(rng)
    n = design.n
    x = rng.standard_normal(n)
    e = draw_errors(rng, design.error_dist, n)
    if design.id == "D4":
        bad = np.abs(x + e) >= D4_BOUND
        while bad.any():
            k = int(bad.sum())
            x[bad] = rng.standard_normal(k)
            e[bad] = draw_errors(rng, design.error_dist, k)
            bad = np.abs(x + e) >= D4_BOUND
    y = inverse_transform(design.id, x + e)
    return validate_dataset(y, x[:, None], ("x",))


def mc_config(**overrides) -> TestConfig:
    """Simulation defaults: Gaussian kernel, rule-of-thumb bandwidths,
    grid -2:0.25:2, no intercept, desk-scale B=200."""
    base = dict(kernel="gaussian", grid=SIMULATION_GRID.tolist(), n_bootstrap=200,
                intercept=False, level=0.05)
    base.update(overrides)
    return TestConfig(**base)


@dataclass
class RejectionRow:
    design: str
    errors: str
    n: int
    flavor: str
    scheme: str
    hypothesis: str
    level: float
    reps: int
    n_bootstrap: int
    seed: int
    rejections: int
    wall_time_s: float
    statistics: list = field(default_factory=list, repr=False)

    @property
    def frequency(self) -> float:
        return self.rejections / self.reps

    @property
    def std_error(self) -> float:
        p = self.frequency
        return math.sqrt(p * (1 - p) / self.reps)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("statistics")
        d["frequency"] = self.frequency
        d["std_error"] = self.std_error
        return d


@dataclass
class RejectionTable:
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    def format(self) -> str:
        head = f"{'design':6} {'errors':7} {'n':>5} {'flavor':7} {'scheme':9} {'H0':8} {'freq':>6} {'se':>6} {'reps':>5}"
        lines = [head]
        for r in self.rows:
            lines.append(f"{r.design:6} {r.errors:7} {r.n:5d} {r.flavor:7} {r.scheme:9} "
                         f"{r.hypothesis:8} {r.frequency:6.3f} {r.std_error:6.3f} {r.reps:5d}")
        return "\n".join(lines)


def _rep_streams(seed: int, r: int):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(r),))
    data_ss, = ss.spawn(1)
    hi, lo = ss.generate_state(2, np.uint32)
    return np.random.default_rng(data_ss), (int(hi) << 32) | int(lo)


def one_replication(design: McDesign, config: TestConfig, r: int):
    rng, boot_seed = _rep_streams(config.seed, r)
    data = generate_design(design, rng)
    cfg = dataclasses.replace(config, seed=boot_seed, threads=1)
    rep = run_test(data, cfg, keep_replicates=False)
    return rep.decision.value == "reject", rep.statistic


def run_mc(design: McDesign, reps: int, config: TestConfig, threads: int = 1,
           progress=None) -> RejectionRow:
    """Rejection frequency of ``config``'s test over ``reps`` simulated samples.

    Replication ``r`` draws its sample from a stream derived from
    ``(config.seed, r)``; the bootstrap seed comes from the same stream.
    """
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    if reps * config.n_bootstrap > 500 * 1000:
        warnings.warn("full-scale Monte Carlo: expect a long runtime", RuntimeWarning)
    t0 = time.perf_counter()

    def run(r):
        try:
            out = one_replication(design, config, r)
        except CurvtestError as exc:
            raise type(exc)(f"Monte Carlo replication {r} failed: {exc}") from exc
        if progress is not None:
            progress(r)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(run, range(reps)))
    else:
        out = [run(r) for r in range(reps)]
    return RejectionRow(
        design=design.id, errors=design.error_dist, n=design.n,
        flavor=config.flavor.value, scheme=config.scheme.value,
        hypothesis=config.hypothesis.value, level=config.level, reps=reps,
        n_bootstrap=config.n_bootstrap, seed=int(config.seed),
        rejections=int(sum(o[0] for o in out)),
        wall_time_s=time.perf_counter() - t0,
        statistics=[o[1] for o in out],
    )

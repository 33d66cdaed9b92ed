"""Core domain types shared across the package."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DataError

TIE_WARNING_THRESHOLD = 0.10


class Hypothesis(str, enum.Enum):
    CONCAVE = "concave"
    LINEAR = "linear"
    CONVEX = "convex"

    @classmethod
    def parse(cls, value) -> "Hypothesis":
        if isinstance(value, cls):
            return value
        aliases = {
            "concave": cls.CONCAVE, "concavity": cls.CONCAVE,
            "linear": cls.LINEAR, "linearity": cls.LINEAR,
            "convex": cls.CONVEX, "convexity": cls.CONVEX,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ConfigError(f"unknown hypothesis {value!r}") from None


class Flavor(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"


class Scheme(str, enum.Enum):
    WILD = "wild"
    RESAMPLE = "resample"


class Estimator(str, enum.Enum):
    OLS = "ols"
    MRC = "mrc"


class Pruning(str, enum.Enum):
    EXACT = "exact"
    PRUNE = "prune"


class Decision(str, enum.Enum):
    REJECT = "reject"
    FAIL_TO_REJECT = "fail_to_reject"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Outcome vector ``y`` (length n) and regressor matrix ``x`` (n x q)."""

    y: np.ndarray
    x: np.ndarray
    column_names: Optional[tuple] = None
    tie_fraction: float = 0.0

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def q(self) -> int:
        return self.x.shape[1]

    @property
    def ties_warning(self) -> bool:
        return self.tie_fraction > TIE_WARNING_THRESHOLD

    def subset(self, mask) -> "Dataset":
        return validate_dataset(self.y[mask], self.x[mask], self.column_names)

    def with_y(self, y) -> "Dataset":
        return validate_dataset(y, self.x, self.column_names)


def tie_fraction(y) -> float:
    y = np.asarray(y)
    if y.size == 0:
        return 0.0
    return 1.0 - np.unique(y).size / y.size


def validate_dataset(raw_y, raw_x, column_names=None, min_n: int = 3) -> Dataset:
    """Build a :class:`Dataset`, rejecting malformed input with :class:`DataError`."""
    try:
        y = np.array(raw_y, dtype=float)
        x = np.array(raw_x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DataError(f"non-numeric input: {exc}") from None
    if y.ndim != 1:
        y = y.reshape(-1) if y.ndim == 2 and 1 in y.shape else y
        if y.ndim != 1:
            raise DataError(f"y must be a vector, got shape {y.shape}")
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError(f"x must be a matrix, got shape {x.shape}")
    if x.shape[0] != y.shape[0]:
        raise DataError(
            f"dimension mismatch: y has {y.shape[0]} rows, x has {x.shape[0]}"
        )
    if x.shape[1] < 1:
        raise DataError("x needs at least one column")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise DataError(f"non-finite value in y at row {bad[0]}")
    bad = np.argwhere(~np.isfinite(x))
    if bad.size:
        r, c = bad[0]
        raise DataError(f"non-finite value in x at row {r}, column {c}")
    if y.shape[0] < min_n:
        raise DataError(f"need at least {min_n} observations, got {y.shape[0]}")
    if column_names is not None:
        column_names = tuple(column_names)
    y.setflags(write=False)
    x.setflags(write=False)
    return Dataset(y=y, x=x, column_names=column_names, tie_fraction=tie_fraction(y))


@dataclass(frozen=True, eq=False)
class EstimatedModel:
    """Fitted coefficients with residuals ``y - intercept - x @ beta``.

    ``index`` is ``x @ beta`` without the intercept, which cancels in the
    pairwise index differences used by the statistics.
    """

    beta: np.ndarray
    intercept: float
    residuals: np.ndarray
    index: np.ndarray

    @property
    def fitted(self) -> np.ndarray:
        return self.intercept + self.index


BandwidthSetting = Union[float, str]  # positive float or "auto"


@dataclass
class TestConfig:
    """Everything needed to run one curvature test."""

    __test__ = False  # not a pytest class

    hypothesis: Hypothesis = Hypothesis.CONCAVE
    flavor: Flavor = Flavor.GLOBAL
    kernel: str = "gaussian"
    truncation_radius: Optional[float] = None
    h_x: BandwidthSetting = "auto"
    h_y: BandwidthSetting = "auto"
    grid: Union[str, Sequence[float]] = "auto"
    scheme: Optional[Scheme] = None  # None -> wild for global, resample for local
    n_bootstrap: int = 500
    level: float = 0.05
    seed: int = 0
    estimator: Estimator = Estimator.OLS
    intercept: bool = False
    normalize: bool = True
    bootstrap_bandwidths: str = "frozen"
    fixed_beta: Optional[Sequence[float]] = None
    pruning: Pruning = Pruning.EXACT
    local_linear_rule: str = "sup_abs"
    threads: int = 1
    mrc_multistarts: int = 4
    mrc_refine_iters: int = 3

    def __post_init__(self):
        self.hypothesis = Hypothesis.parse(self.hypothesis)
        self.flavor = Flavor(self.flavor)
        self.estimator = Estimator(self.estimator)
        self.pruning = Pruning(self.pruning)
        if self.scheme is None:
            self.scheme = Scheme.WILD if self.flavor is Flavor.GLOBAL else Scheme.RESAMPLE
        self.scheme = Scheme(self.scheme)
        self.validate()

    def validate(self):
        if not (0.0 < self.level <= 0.5):
            raise ConfigError(f"level must lie in (0, 0.5], got {self.level}")
        if int(self.n_bootstrap) < 2:
            raise ConfigError("n_bootstrap must be at least 2")
        if self.flavor is Flavor.GLOBAL and self.scheme is not Scheme.WILD:
            raise ConfigError(
                "the global test requires the symmetric wild scheme; "
                "residual resampling does not impose error symmetry"
            )
        for name in ("h_x", "h_y"):
            v = getattr(self, name)
            if v != "auto" and not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be 'auto' or a positive number, got {v!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.local_linear_rule not in ("sup_abs", "abs_inf"):
            raise ConfigError(f"unknown local linear rule {self.local_linear_rule!r}")
        if self.bootstrap_bandwidths not in ("recompute", "frozen"):
            raise ConfigError(f"unknown bootstrap bandwidth policy {self.bootstrap_bandwidths!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, enum.Enum):
                d[k] = v.value
            elif isinstance(v, np.ndarray):
                d[k] = v.tolist()
            elif isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TestConfig":
        return cls(**d)


@dataclass
class TestReport:
    """Outcome of one test. ``decision`` can be re-derived from the other fields."""

    __test__ = False

    hypothesis: Hypothesis
    flavor: Flavor
    statistic: float
    bootstrap_quantiles: dict
    critical_value: float
    decision: Decision
    beta_hat: np.ndarray
    h_x_used: float
    h_y_used: Optional[float]
    tie_fraction: float
    runtime_ms: int
    n: int
    level: float
    curve: Optional[dict] = None
    replicate_stats: Optional[np.ndarray] = field(default=None, repr=False)
    warnings: list = field(default_factory=list)

    def to_dict(self, include_replicates: bool = False) -> dict:
        d = {
            "hypothesis": self.hypothesis.value,
            "flavor": self.flavor.value,
            "n": self.n,
            "level": self.level,
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "decision": self.decision.value,
            "bootstrap_quantiles": {repr(float(k)): v for k, v in self.bootstrap_quantiles.items()},
            "beta_hat": [float(b) for b in self.beta_hat],
            "h_x_used": self.h_x_used,
            "h_y_used": self.h_y_used,
            "tie_fraction": self.tie_fraction,
            "runtime_ms": self.runtime_ms,
            "warnings": list(self.warnings),
        }
        if self.curve is not None:
            d["curve"] = self.curve
        if include_replicates and self.replicate_stats is not None:
            d["replicate_stats"] = [float(v) for v in self.replicate_stats]
        return d

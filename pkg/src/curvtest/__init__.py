"""Bootstrap tests for concavity, linearity and convexity of the outcome
transformation in the single-index transformation model T(Y) = X'b + e."""

__version__ = "0.1.0"

from .bootstrap import (BootstrapResult, bootstrap_distribution, decide,
                        empirical_quantile, run_test)
from .data import (Dataset, Decision, EstimatedModel, Estimator, Flavor, Hypothesis,
                   Pruning, Scheme, TestConfig, TestReport, validate_dataset)
from .errors import ConfigError, CurvtestError, DataError, NumericalError, SingularDesignError
from .estimators import MRCOptions, mrc_fit, mrc_objective, ols_fit
from .kernels import (Bandwidth, KernelSpec, bandwidth_rot, index_bandwidth,
                      kernel_condition_integral, kernel_eval)
from .ustats import (GlobalStat, LocalStatCurve, global_statistic, global_u_stat,
                     global_u_stat_quad, local_statistics, local_u_stat)

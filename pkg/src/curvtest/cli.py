"""Command-line interface: ``curvtest {test,mc,kernel-check,bandwidth}``.

Reports are JSON documents on stdout (or ``--out``). Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import bandwidths, fit, resolve_grid, run_test
from .data import Estimator, Flavor, TestConfig
from .errors import ConfigError, CurvtestError
from .io import CsvSchema, dumps, ingest_csv, report_document
from .kernels import KernelSpec, kernel_condition_integral
from .mc import DESIGNS, McDesign, RejectionTable, mc_config, run_mc
from .ustats import SIMULATION_GRID

log = logging.getLogger("curvtest")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{message}\n\n{self.format_usage()}")


def parse_grid(text):
    text = str(text).strip()
    if text == "auto":
        return "auto"
    if text == "sim":
        return SIMULATION_GRID.tolist()
    try:
        if ":" in text:
            a, step, b = (float(t) for t in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            k = int(math.floor((b - a) / step + 1e-9))
            return np.round(a + step * np.arange(k + 1), 12).tolist()
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}; use auto, sim, a:step:b or a list") from None


def _bw(text):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"bandwidth must be 'auto' or a number, got {text!r}") from None


def _column(text):
    return int(text) if text.isdigit() else text


def _add_data_args(p):
    p.add_argument("input", help="CSV file")
    p.add_argument("--y", default="0", help="outcome column (name or 0-based index)")
    p.add_argument("--x", default="1", help="comma-separated regressor columns")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--filter", default=None, help='row filter, e.g. "loan>=1000"')


def _add_test_args(p):
    p.add_argument("--hypothesis", default="concavity",
                   choices=["concavity", "linearity", "convexity", "concave", "linear", "convex"])
    p.add_argument("--flavor", default="global", choices=["global", "local"])
    p.add_argument("--kernel", default="gaussian", choices=["gaussian", "epanechnikov", "biweight"])
    p.add_argument("--truncation", type=float, default=None,
                   help="truncation radius for the Gaussian kernel")
    p.add_argument("--bandwidth-x", default="auto")
    p.add_argument("--bandwidth-y", default="auto")
    p.add_argument("--grid", default="auto",
                   help="auto (17 points, 5%%-95%% quantiles), sim (-2:0.25:2), a:step:b or a list")
    p.add_argument("--scheme", default=None, choices=["wild", "resample"])
    p.add_argument("--bootstrap", type=int, default=500)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--pruning", default="exact", choices=["exact", "prune"])
    p.add_argument("--no-normalize", action="store_true",
                   help="keep the raw OLS scale instead of |beta_1| = 1")
    p.add_argument("--bootstrap-bandwidths", default="frozen",
                   choices=["recompute", "frozen"])


def build_parser():
    parser = _Parser(prog="curvtest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"curvtest {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("test", help="run a curvature test on CSV data")
    _add_data_args(p)
    _add_test_args(p)
    p.add_argument("--estimator", default="ols", choices=["ols", "mrc"])
    p.add_argument("--intercept", action="store_true", help="fit an intercept (OLS)")
    p.add_argument("--beta", default=None, help="fix beta (comma list) instead of estimating")
    p.add_argument("--local-linear-rule", default="sup_abs", choices=["sup_abs", "abs_inf"])
    p.add_argument("--replicates", action="store_true", help="include bootstrap replicates")
    p.add_argument("--replay", default=None, help="re-run the configuration embedded in a report")
    p.add_argument("--out", default=None)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("mc", help="Monte Carlo rejection frequencies for designs D0-D4")
    p.add_argument("--design", default="D0", help=f"comma list from {','.join(DESIGNS)}")
    p.add_argument("--errors", default="normal", choices=["normal", "gumbel"])
    p.add_argument("--n", default="100", help="comma list of sample sizes")
    p.add_argument("--reps", type=int, default=200)
    _add_test_args(p)
    p.set_defaults(bootstrap=200, grid="sim")
    p.add_argument("--full-scale", action="store_true",
                   help="1000 replications x 500 bootstrap draws")
    p.add_argument("--out", default=None)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("kernel-check", help="evaluate the kernel positivity integral")
    p.add_argument("--kernel", default="gaussian", choices=["gaussian", "epanechnikov", "biweight"])
    p.add_argument("--truncation", type=float, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("bandwidth", help="rule-of-thumb bandwidths for a dataset")
    _add_data_args(p)
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--out", default=None)
    return parser


def _config_from_args(a) -> TestConfig:
    beta = None
    if getattr(a, "beta", None):
        beta = [float(t) for t in a.beta.split(",")]
    return TestConfig(
        hypothesis=a.hypothesis, flavor=a.flavor, kernel=a.kernel,
        truncation_radius=a.truncation, h_x=_bw(a.bandwidth_x), h_y=_bw(a.bandwidth_y),
        grid=parse_grid(a.grid), scheme=a.scheme, n_bootstrap=a.bootstrap, level=a.level,
        seed=a.seed, estimator=getattr(a, "estimator", "ols"),
        intercept=getattr(a, "intercept", False), fixed_beta=beta, pruning=a.pruning,
        local_linear_rule=getattr(a, "local_linear_rule", "sup_abs"), threads=a.threads,
        normalize=not a.no_normalize, bootstrap_bandwidths=a.bootstrap_bandwidths,
    )


def _schema_from_args(a) -> CsvSchema:
    return CsvSchema(y_column=_column(a.y), x_columns=[_column(c) for c in a.x.split(",")],
                     header=not a.no_header, delimiter=a.delimiter)


def _emit(doc, out):
    text = dumps(doc)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_test(a):
    if a.replay:
        prev = json.loads(Path(a.replay).read_text())
        cfg = TestConfig.from_dict(prev["config"]["test"])
        schema = CsvSchema(**prev["config"]["schema"])
        row_filter = prev["config"].get("filter")
        path = prev["config"]["input"]
    else:
        cfg = _config_from_args(a)
        schema = _schema_from_args(a)
        row_filter = a.filter
        path = a.input
    data = ingest_csv(path, schema, row_filter)
    if cfg.estimator is Estimator.MRC:
        log.warning("MRC re-estimates beta in each of %d bootstrap draws; O(n^2) per "
                    "objective evaluation, expect a long run", cfg.n_bootstrap)
    report = run_test(data, cfg, keep_replicates=a.replicates)
    body = report.to_dict(include_replicates=a.replicates)
    config = {"test": cfg.to_dict(), "schema": schema.to_dict(), "filter": row_filter,
              "input": str(path)}
    if cfg.flavor is Flavor.LOCAL:
        body["grid_resolved"] = report.curve["grid"]
    _emit(report_document("test_report", body, config, input_path=path), a.out)
    if not a.quiet:
        sys.stderr.write(
            f"{report.flavor.value} test of {report.hypothesis.value}: statistic "
            f"{report.statistic:.6g}, critical value {report.critical_value:.6g} -> "
            f"{report.decision.value} at level {report.level}\n")
        for w in report.warnings:
            sys.stderr.write(f"warning: {w}\n")
    return 0


def cmd_mc(a):
    if a.full_scale:
        a.reps, a.bootstrap = 1000, 500
        log.warning("full-scale profile: 1000 replications x 500 bootstrap draws")
    cfg = mc_config(hypothesis=a.hypothesis, flavor=a.flavor, kernel=a.kernel,
                    truncation_radius=a.truncation, h_x=_bw(a.bandwidth_x),
                    h_y=_bw(a.bandwidth_y), grid=parse_grid(a.grid), scheme=a.scheme,
                    n_bootstrap=a.bootstrap, level=a.level, seed=a.seed, pruning=a.pruning,
                    normalize=not a.no_normalize,
                    bootstrap_bandwidths=a.bootstrap_bandwidths)
    table = RejectionTable()
    try:
        sizes = [int(s) for s in a.n.split(",")]
    except ValueError:
        raise ConfigError(f"--n must be a comma list of integers, got {a.n!r}") from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for d in a.design.split(","):
            for n in sizes:
                row = run_mc(McDesign(d.strip(), a.errors, n), a.reps, cfg, threads=a.threads)
                table.rows.append(row)
    config = {"test": cfg.to_dict(), "designs": a.design, "errors": a.errors,
              "n": sizes, "reps": a.reps}
    _emit(report_document("rejection_table", table.to_dict(), config), a.out)
    if not a.quiet:
        sys.stderr.write(table.format() + "\n")
    return 0


def cmd_kernel_check(a):
    spec = KernelSpec(a.kernel, a.truncation)
    res = kernel_condition_integral(spec)
    full = kernel_condition_integral(spec, domain="full")
    body = {"kernel": spec.family, "truncation_radius": spec.truncation_radius,
            "value": res.value, "positive": res.positive, "abs_error": res.abs_error,
            "domain": res.domain, "full_plane_value": full.value}
    _emit(report_document("kernel_check", body, {"kernel": spec.family,
                                                 "truncation_radius": a.truncation}), a.out)
    return 0


def cmd_bandwidth(a):
    schema = _schema_from_args(a)
    data = ingest_csv(a.input, schema, a.filter)
    cfg = TestConfig(flavor="local", intercept=a.intercept)
    model = fit(data, cfg)
    hx, hy = bandwidths(data.y, model.index, cfg)
    body = {"n": data.n, "h_x": hx, "h_y": hy, "beta_hat": model.beta.tolist(),
            "default_grid": resolve_grid(data, cfg).tolist(), "tie_fraction": data.tie_fraction}
    _emit(report_document("bandwidth", body, {"schema": schema.to_dict(), "filter": a.filter},
                          input_path=a.input), a.out)
    return 0


COMMANDS = {"test": cmd_test, "mc": cmd_mc, "kernel-check": cmd_kernel_check,
            "bandwidth": cmd_bandwidth}


def run_cli(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        if a.command is None:
            raise ConfigError(parser.format_help())
        return COMMANDS[a.command](a)
    except CurvtestError as exc:
        err = {"error": {"type": type(exc).__name__, "message": str(exc),
                         "exit_code": exc.exit_code}}
        sys.stderr.write(json.dumps(err) + "\n")
        return exc.exit_code
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": {"type": type(exc).__name__,
                                               "message": str(exc), "exit_code": 2}}) + "\n")
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

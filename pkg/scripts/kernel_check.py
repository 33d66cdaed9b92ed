"""Positivity integral of the kernel condition for each supported kernel,
on [-1, 1]^2 and over the whole plane, with a crude Monte Carlo cross-check."""

import numpy as np

from curvtest.kernels import KernelSpec, kernel_condition_integral, kernel_eval


def mc_estimate(spec, draws=2_000_000, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.uniform(-1, 1, size=(draws, 2))
    k = kernel_eval(spec, "value", s[:, 0]) * kernel_eval(spec, "value", s[:, 1])
    a = lambda u: kernel_eval(spec, "antiderivative", u)  # noqa: E731
    f = k * (a(2 * s[:, 0] - s[:, 1]) + 2 * a(2 * s[:, 1] - s[:, 0])) * s[:, 0]
    return 4 * f.mean(), 4 * f.std(ddof=1) / np.sqrt(draws)


if __name__ == "__main__":
    for spec in (KernelSpec("gaussian"), KernelSpec("gaussian", 3.0),
                 KernelSpec("epanechnikov"), KernelSpec("biweight")):
        sq = kernel_condition_integral(spec)
        full = kernel_condition_integral(spec, domain="full")
        est, se = mc_estimate(spec)
        name = spec.family + (f"(r={spec.truncation_radius})" if spec.truncation_radius else "")
        print(f"{name:16} square {sq.value:.7f} (+-{sq.abs_error:.1e})  "
              f"full {full.value:+.7f}  mc {est:.5f} +- {se:.5f}  positive={sq.positive}")

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from curvtest.data import Pruning, validate_dataset
from curvtest.errors import ConfigError, DataError
from curvtest.kernels import KernelSpec
from curvtest.ustats import (SIMULATION_GRID, global_statistic, global_u_stat, global_u_stat_quad,
                             local_statistics, local_u_stat)

GAUSS = KernelSpec("gaussian")
EPAN = KernelSpec("epanechnikov")
PHI0 = 1 / math.sqrt(2 * math.pi)


def toy(order=(0, 1, 2)):
    y = np.array([0.0, 1.0, 3.0])[list(order)]
    x = np.array([0.0, 1.0, 2.0])[list(order)]
    return validate_dataset(y, x[:, None])


def random_dataset(rng, n, q, ties=False):
    x = rng.normal(size=(n, q))
    y = x @ rng.normal(size=q) + rng.normal(size=n)
    if ties:
        y = np.round(y, 1)
    return validate_dataset(y, x), rng.normal(size=q)


def test_toy_single_triple():
    g = global_u_stat(toy(), [1.0], GAUSS, 1.0)
    assert g.u_n == pytest.approx(PHI0 / 6, abs=1e-15)
    assert g.u_n == pytest.approx(0.0664904, abs=5e-8)
    assert g.n_triples_contributing == 1
    s_n = global_statistic(toy(), [1.0], GAUSS, 1.0).s_n
    assert s_n == pytest.approx(math.sqrt(3) * PHI0 / 6, abs=1e-15)
    # 0.1151648 is sqrt(3) times the rounded 0.0664904; exact value is 0.11516472
    assert s_n == pytest.approx(0.1151648, abs=1e-7)


def test_toy_arithmetic_progression_is_zero():
    d = validate_dataset([0, 1, 2], [[0], [1], [2]])
    for spec in (GAUSS, EPAN, KernelSpec("biweight")):
        for h in (0.1, 1.0, 7.0):
            g = global_u_stat(d, [1.0], spec, h)
            assert g.u_n == 0.0 and g.s_n == 0.0


def test_toy_row_order_irrelevant():
    assert global_u_stat(toy((2, 0, 1)), [1.0], GAUSS, 1.0).u_n == global_u_stat(
        toy(), [1.0], GAUSS, 1.0).u_n


def test_bad_inputs():
    with pytest.raises(ConfigError):
        global_u_stat(toy(), [1.0], GAUSS, 0.0)
    with pytest.raises(ConfigError):
        global_u_stat(toy(), [1.0], GAUSS, -1.0)
    with pytest.raises(ConfigError, match="nonempty"):
        local_statistics(toy(), [1.0], GAUSS, 1.0, 1.0, [])
    with pytest.raises(ConfigError, match="sorted"):
        local_statistics(toy(), [1.0], GAUSS, 1.0, 1.0, [1.0, 0.0])
    with pytest.raises(DataError):
        global_u_stat(toy(), [1.0, 2.0], GAUSS, 1.0)


def test_local_toy_matches_hand_value():
    # only (0,1,3) qualifies; Y kernels at y=0 give phi(0) phi(1) phi(3)
    phi = lambda u: math.exp(-u * u / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    expected = phi(0) * phi(0) * phi(1) * phi(3) / 6
    assert local_u_stat(toy(), [1.0], GAUSS, 1.0, 1.0, 0.0) == pytest.approx(expected, rel=1e-13)


def test_local_toy_curve_matches_oracle():
    grid = [-0.5, 0.0, 1.5]
    curve = local_statistics(toy(), [1.0], GAUSS, 1.0, 0.8, grid)
    for t, point in enumerate(grid):
        ref = oracles.local_u(toy().y, toy().x, [1.0], "gaussian", 1.0, 0.8, point)
        assert oracles.close(curve.values[t], math.sqrt(3 * 0.8) * ref)


def test_local_vanishes_outside_support():
    d = toy()
    assert local_u_stat(d, [1.0], EPAN, 1.0, 0.5, 10.0) == 0.0
    assert local_u_stat(d, [1.0], EPAN, 1.0, 0.5, 10.0, mode=Pruning.PRUNE) == 0.0


def test_single_point_grid_aggregates():
    c = local_statistics(toy(), [1.0], GAUSS, 1.0, 1.0, [0.5])
    assert c.aggregate_inf == c.aggregate_sup == c.values[0]
    assert c.aggregate_sup_abs == abs(c.values[0])


def test_d0_curve_order():
    rng = np.random.default_rng(8)
    x = rng.normal(size=100)
    d = validate_dataset(x + rng.normal(size=100), x[:, None])
    c = local_statistics(d, [1.0], GAUSS, 0.5, 0.5, SIMULATION_GRID)
    assert c.values.shape == SIMULATION_GRID.shape
    assert c.aggregate_inf <= c.aggregate_sup
    assert c.aggregate_sup_abs == max(abs(c.aggregate_inf), abs(c.aggregate_sup))


def test_quad_examples():
    d = validate_dataset([0, 1, 2, 3], [[0], [1], [2], [3]])
    assert global_u_stat_quad(d, [1.0], GAUSS, 1.0) == 0.0
    with pytest.raises(DataError):
        global_u_stat_quad(toy(), [1.0], GAUSS, 1.0)
    big = validate_dataset(np.arange(12.0), np.arange(12.0)[:, None])
    with pytest.raises(ConfigError, match="cap"):
        global_u_stat_quad(big, [1.0], GAUSS, 1.0, cap=10)
    d5 = validate_dataset([0, 1, 3, 4, 9], [[0], [1], [2], [2.5], [3]])
    assert oracles.close(global_u_stat_quad(d5, [1.0], GAUSS, 0.7),
                         oracles.quad_stat(d5.y, d5.x, [1.0], "gaussian", 0.7))


@pytest.mark.parametrize("seed", range(100))
def test_oracle_equivalence(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(10, 41))
    q = int(rng.integers(1, 4))
    d, beta = random_dataset(rng, n, q, ties=seed % 5 == 0)
    family = ["gaussian", "epanechnikov", "biweight"][seed % 3]
    spec = KernelSpec(family)
    hx, hy = float(rng.uniform(0.3, 2.0)), float(rng.uniform(0.3, 2.0))
    ref = oracles.global_u(d.y, d.x, beta, family, hx)
    assert oracles.close(global_u_stat(d, beta, spec, hx).u_n, ref)
    point = float(np.median(d.y))
    ref_local = oracles.local_u(d.y, d.x, beta, family, hx, hy, point)
    assert oracles.close(local_u_stat(d, beta, spec, hx, hy, point), ref_local)
    if n <= 16:
        ref_quad = oracles.quad_stat_vectorized(d.y, d.x, beta, family, hx)
        assert oracles.close(global_u_stat_quad(d, beta, spec, hx), ref_quad)


def test_truncated_gaussian_matches_oracle():
    rng = np.random.default_rng(5)
    d, beta = random_dataset(rng, 25, 2)
    spec = KernelSpec("gaussian", truncation_radius=1.5)
    ref = oracles.global_u(d.y, d.x, beta, "gaussian", 0.4, radius=1.5)
    assert oracles.close(global_u_stat(d, beta, spec, 0.4).u_n, ref)


@pytest.mark.parametrize("seed", range(50))
def test_pruned_equals_exact(seed):
    rng = np.random.default_rng(seed)
    d, beta = random_dataset(rng, 40, 2)
    hx, hy = 0.3, 0.4
    exact = global_u_stat(d, beta, EPAN, hx, Pruning.EXACT).u_n
    pruned = global_u_stat(d, beta, EPAN, hx, Pruning.PRUNE).u_n
    assert exact == pruned
    grid = np.linspace(d.y.min(), d.y.max(), 9)
    ce = local_statistics(d, beta, EPAN, hx, hy, grid, Pruning.EXACT).values
    cp = local_statistics(d, beta, EPAN, hx, hy, grid, Pruning.PRUNE).values
    np.testing.assert_allclose(cp, ce, rtol=0, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(5, 30))
def test_permutation_invariance(seed, n):
    rng = np.random.default_rng(seed)
    d, beta = random_dataset(rng, n, 2)
    perm = rng.permutation(n)
    dp = validate_dataset(d.y[perm], d.x[perm])
    a = global_u_stat(d, beta, GAUSS, 0.5).u_n
    b = global_u_stat(dp, beta, GAUSS, 0.5).u_n
    assert abs(a - b) <= 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(5, 30))
def test_reflection_antisymmetry(seed, n):
    rng = np.random.default_rng(seed)
    d, beta = random_dataset(rng, n, 2)
    dm = validate_dataset(-d.y, -d.x)
    a = global_u_stat(d, beta, GAUSS, 0.5).u_n
    b = global_u_stat(dm, beta, GAUSS, 0.5).u_n
    assert abs(a + b) <= 1e-12
    point = float(d.y[0])
    la = local_u_stat(d, beta, GAUSS, 0.5, 0.7, point)
    lb = local_u_stat(dm, beta, GAUSS, 0.5, 0.7, -point)
    assert abs(la + lb) <= 1e-12


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 5.0))
def test_magnitude_bound(seed, h):
    # each of the n(n-1)(n-2) ordered triples contributes at most K(0)/h, and at
    # most one ordering in six is increasing
    rng = np.random.default_rng(seed)
    d, beta = random_dataset(rng, 15, 1)
    assert abs(global_u_stat(d, beta, GAUSS, h).u_n) <= PHI0 / (6 * h) + 1e-15


def test_parallel_equals_serial():
    rng = np.random.default_rng(3)
    d, beta = random_dataset(rng, 60, 2)
    assert global_u_stat(d, beta, GAUSS, 0.4, parallel=True).u_n == global_u_stat(
        d, beta, GAUSS, 0.4).u_n
    a = local_statistics(d, beta, GAUSS, 0.4, 0.5, SIMULATION_GRID)
    b = local_statistics(d, beta, GAUSS, 0.4, 0.5, SIMULATION_GRID, parallel=True)
    np.testing.assert_array_equal(a.values, b.values)
    assert global_u_stat_quad(d, beta, GAUSS, 0.4) == global_u_stat_quad(
        d, beta, GAUSS, 0.4, parallel=True)

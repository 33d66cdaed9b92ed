import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvtest.data import validate_dataset
from curvtest.errors import DataError, SingularDesignError
from curvtest.estimators import (MRCOptions, model_from_beta, mrc_fit, mrc_objective,
                                 normalize_scale, ols_fit)


def test_ols_exact_fit():
    m = ols_fit(validate_dataset([1, 2, 3], [[1], [2], [3]]), intercept=False)
    assert m.beta == pytest.approx([1.0])
    np.testing.assert_allclose(m.residuals, 0, atol=1e-12)


def test_ols_with_intercept_normal_equations():
    # n=3, sum x=7, sum x^2=21, sum y=6, sum xy=17:
    # slope = (3*17 - 7*6) / (3*21 - 49) = 9/14, intercept = (6 - 7*9/14) / 3 = 1/2
    m = ols_fit(validate_dataset([1, 2, 3], [[1], [2], [4]]), intercept=True)
    assert m.beta == pytest.approx([9 / 14], abs=1e-12)
    assert m.intercept == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(m.residuals, [-1 / 7, 3 / 14, -1 / 14], atol=1e-12)
    np.testing.assert_allclose(m.index, np.array([1, 2, 4]) * 9 / 14)


def test_ols_singular_names_column():
    x = np.column_stack([np.arange(5.0), np.arange(5.0) ** 2, np.arange(5.0)])
    with pytest.raises(SingularDesignError) as info:
        ols_fit(validate_dataset(np.arange(5.0), x))
    assert info.value.column == 2


def test_ols_constant_column_with_intercept():
    x = np.column_stack([np.arange(6.0), np.ones(6)])
    with pytest.raises(SingularDesignError):
        ols_fit(validate_dataset(np.arange(6.0) ** 2, x), intercept=True)


def _random_data(seed, n=40, q=3):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, q))
    y = x @ rng.normal(size=q) + rng.normal(size=n) + 2.0
    return validate_dataset(y, x)


@given(st.integers(0, 10_000), st.booleans())
def test_ols_residual_orthogonality(seed, intercept):
    d = _random_data(seed)
    m = ols_fit(d, intercept=intercept)
    scale = np.abs(d.x).sum(axis=0) * np.abs(d.y).max()
    assert np.all(np.abs(d.x.T @ m.residuals) <= 1e-8 * scale)
    if intercept:
        assert abs(m.residuals.mean()) <= 1e-10 * max(1, np.abs(d.y).max())
    np.testing.assert_allclose(m.residuals, d.y - m.intercept - d.x @ m.beta, atol=1e-12)


@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_ols_permutation_equivariance(seed, rnd):
    d = _random_data(seed)
    perm = list(range(d.n))
    rnd.shuffle(perm)
    dp = validate_dataset(d.y[perm], d.x[perm])
    np.testing.assert_allclose(ols_fit(dp).beta, ols_fit(d).beta, rtol=0, atol=1e-12)


def test_normalize_scale():
    d = _random_data(1)
    m = normalize_scale(d, ols_fit(d))
    assert abs(m.beta[0]) == 1.0
    np.testing.assert_allclose(m.residuals, d.y - d.x @ m.beta)


def test_model_from_beta():
    d = validate_dataset([0, 1, 3], [[0], [1], [2]])
    m = model_from_beta(d, [1.0])
    np.testing.assert_array_equal(m.residuals, [0, 0, 1])
    with pytest.raises(DataError):
        model_from_beta(d, [1.0, 2.0])


def test_mrc_single_regressor_sign():
    x = np.linspace(-1, 1, 20)
    assert mrc_fit(validate_dataset(x**3, x[:, None])).beta == pytest.approx([1.0])
    assert mrc_fit(validate_dataset(-x, x[:, None])).beta == pytest.approx([-1.0])


def test_mrc_constant_outcome():
    with pytest.raises(DataError, match="degenerate"):
        mrc_fit(validate_dataset(np.ones(10), np.arange(20.0).reshape(10, 2)))


def _mrc_design(seed=11, n=200):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    y = x @ np.array([1.0, 2.0]) + 0.1 * rng.normal(size=n)
    return validate_dataset(y, x)


def test_mrc_recovers_coefficient_against_grid_search():
    d = _mrc_design()
    # oracle: dense grid over beta_2 with beta_1 = +1
    grid = np.round(np.arange(-5, 5.0001, 0.01), 10)
    scores = [mrc_objective(d, [1.0, b]) for b in grid]
    b_oracle = grid[int(np.argmax(scores))]
    assert abs(b_oracle - 2.0) < 0.3
    m = mrc_fit(d)
    assert abs(m.beta[0]) == 1.0
    assert abs(m.beta[1] - 2.0) < 0.3
    assert mrc_objective(d, m.beta) >= max(scores)
    np.testing.assert_allclose(m.residuals, d.y - d.x @ m.beta)


def test_mrc_deterministic():
    d = _mrc_design(seed=3, n=80)
    np.testing.assert_array_equal(mrc_fit(d, MRCOptions(seed=5)).beta,
                                  mrc_fit(d, MRCOptions(seed=5)).beta)


def test_mrc_objective_rank_invariance():
    d = _mrc_design(seed=4, n=60)
    d_exp = validate_dataset(np.exp(d.y), d.x)
    rng = np.random.default_rng(0)
    for _ in range(10):
        b = rng.normal(size=2)
        assert mrc_objective(d, b) == mrc_objective(d_exp, b)

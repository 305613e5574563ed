import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqrif.exceptions import DegenerateDataError, RankDeficiencyError
from mqrif.huber import MQuantileSpec
from mqrif.oracles import univariate_expectile_oracle, univariate_quantile_oracle
from mqrif.solver import (IrlsOptions, equation_norm, fit_conditional_linear,
                          fit_unconditional, reflect_spec)

# brute-force oracle roots (grid step 0.01) on default_rng(2024).normal(size=(50, 2))
FROZEN_ROOTS = [
    (0.25, [1, 0], 0.5, [-0.4741, 0.11214]),
    (0.1, [0, 1], 0.0, [-0.13914, -0.41119]),
    (0.4, [1, -1], 3.0, [-0.10488, 0.24538]),
]


@pytest.mark.parametrize("tau,u,c,root", FROZEN_ROOTS)
def test_frozen_oracle_roots(tau, u, c, root):
    Y = np.random.default_rng(2024).normal(size=(50, 2))
    fit = fit_unconditional(Y, MQuantileSpec.make(tau, u, c))
    assert fit.converged
    np.testing.assert_allclose(fit.theta, root, atol=0.02)


@pytest.mark.parametrize("n", [9, 51, 199])
@pytest.mark.parametrize("tau", [0.1, 0.25, 0.5])
def test_univariate_quantile_exact(n, tau):
    y = np.random.default_rng(n).normal(size=n)
    fit = fit_unconditional(y, MQuantileSpec.make(tau, [1.0], 0.0))
    assert fit.converged
    assert fit.theta[0] == univariate_quantile_oracle(y, tau)


@pytest.mark.parametrize("tau", [0.1, 0.5])
def test_univariate_flat_root_when_n_tau_integer(tau):
    # n * tau = k integer: every point of [y_(k), y_(k+1)] solves the equation
    y = np.random.default_rng(50).normal(size=50)
    k = round(50 * tau)
    ys = np.sort(y)
    theta = fit_unconditional(y, MQuantileSpec.make(tau, [1.0], 0.0)).theta[0]
    assert ys[k - 1] <= theta <= ys[k]


def test_univariate_quantile_on_integers():
    fit = fit_unconditional(np.arange(1.0, 10.0), MQuantileSpec.make(0.25, [1.0], 0.0))
    assert fit.theta[0] == 3.0


@pytest.mark.parametrize("tau,expected", [(0.1, 2.76), (0.25, 3.8), (0.5, 5.0)])
def test_univariate_expectile_closed_form(tau, expected):
    fit = fit_unconditional(np.arange(1.0, 10.0), MQuantileSpec.make(tau, [1.0], 1e6))
    assert fit.theta[0] == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("tau", [0.05, 0.3, 0.7, 0.95])
def test_univariate_expectile_oracle(tau):
    y = np.random.default_rng(4).standard_t(3, size=150)
    fit = fit_unconditional(y, MQuantileSpec.make(tau, [1.0], 1e6))
    assert fit.theta[0] == pytest.approx(univariate_expectile_oracle(y, tau), abs=1e-8)


def test_mean_reduction(biv, diag_u):
    fit = fit_unconditional(biv, MQuantileSpec.make(0.5, diag_u, 1e6))
    np.testing.assert_allclose(fit.theta, biv.mean(axis=0), atol=1e-10)


def test_reflection_is_applied_above_half(biv, diag_u):
    spec = MQuantileSpec.make(0.8, diag_u, 1.0)
    fit = fit_unconditional(biv, spec)
    assert fit.spec == spec
    assert fit.solved_spec == reflect_spec(spec)
    direct = fit_unconditional(biv, spec, reflect=False)
    np.testing.assert_allclose(fit.theta, direct.theta, atol=1e-7)


@pytest.mark.parametrize("c", [0.0, 1.0])
def test_translation_equivariance(biv, diag_u, c):
    spec = MQuantileSpec.make(0.2, diag_u, c)
    shift = np.array([3.0, -7.0])
    a = fit_unconditional(biv, spec).theta
    b = fit_unconditional(biv + shift, spec).theta
    np.testing.assert_allclose(b, a + shift, atol=1e-7)


@pytest.mark.parametrize("c", [0.0, 0.7])
def test_rotation_equivariance(biv, c):
    ang = 0.9
    Q = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    u = np.array([1.0, 0.0])
    a = fit_unconditional(biv, MQuantileSpec.make(0.15, u, c)).theta
    b = fit_unconditional(biv @ Q.T, MQuantileSpec.make(0.15, Q @ u, c)).theta
    np.testing.assert_allclose(b, Q @ a, atol=1e-7)


def test_equation_norm_small_at_root(biv, diag_u):
    spec = MQuantileSpec.make(0.3, diag_u, 0.5)
    fit = fit_unconditional(biv, spec)
    assert fit.eq_norm <= 1e-7
    assert equation_norm(biv, fit.theta, spec) == pytest.approx(fit.eq_norm)
    assert equation_norm(biv, fit.theta + 0.1, spec) > 1e-3


def test_zero_residual_rows_absorb_at_c_zero():
    y = np.arange(1.0, 10.0)[:, None]
    spec = MQuantileSpec.make(0.25, [1.0], 0.0)
    assert equation_norm(y, [3.0], spec) == 0.0
    assert equation_norm(y, [5.0], spec) > 0.0


def test_non_convergence_flag(biv, diag_u):
    fit = fit_unconditional(biv, MQuantileSpec.make(0.1, diag_u, 0.0), IrlsOptions(max_iter=1))
    assert not fit.converged
    assert fit.iterations == 1


@pytest.mark.parametrize("init", ["mean", "median", np.array([5.0, 5.0])])
def test_initialisation_does_not_change_root(biv, diag_u, init):
    spec = MQuantileSpec.make(0.3, diag_u, 1.0)
    ref = fit_unconditional(biv, spec).theta
    got = fit_unconditional(biv, spec, IrlsOptions(init=init)).theta
    np.testing.assert_allclose(got, ref, atol=1e-7)


def test_options_validation():
    with pytest.raises(ValueError):
        IrlsOptions(max_iter=0)
    with pytest.raises(ValueError):
        IrlsOptions(tol=0.0)
    with pytest.raises(ValueError):
        fit_unconditional(np.eye(3), MQuantileSpec.make(0.3, [1, 0, 0], 1.0),
                          IrlsOptions(init="mode"))


def test_degenerate_inputs(diag_u):
    spec = MQuantileSpec.make(0.3, diag_u, 1.0)
    with pytest.raises(DegenerateDataError):
        fit_unconditional(np.ones((10, 2)), spec)
    with pytest.raises(DegenerateDataError):
        fit_unconditional(np.zeros((2, 2)) + [[0, 1], [1, 0]], spec)
    with pytest.raises(ValueError):
        fit_unconditional(np.array([[0.0, np.nan], [1, 1], [2, 2]]), spec)
    with pytest.raises(ValueError):
        fit_unconditional(np.zeros((10, 3)), spec)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.5), st.sampled_from([0.0, 0.5, 2.0]))
def test_fit_lies_in_bounding_box(seed, tau, c):
    Y = np.random.default_rng(seed).normal(size=(60, 2))
    fit = fit_unconditional(Y, MQuantileSpec.make(tau, [0.6, 0.8], c))
    assert fit.converged
    assert np.all(fit.theta >= Y.min(axis=0) - 1e-9)
    assert np.all(fit.theta <= Y.max(axis=0) + 1e-9)


# conditional linear M-quantile regression

def _linear_data(n=400, seed=1, noise=1.0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    B = np.array([[1.0, -1.0], [2.0, 0.5], [-0.5, 1.5]])
    return X @ B + noise * rng.normal(size=(n, 2)), X, B


def test_conditional_noiseless_recovers_B(diag_u):
    Y, X, B = _linear_data(noise=0.0)
    fit = fit_conditional_linear(Y, X, MQuantileSpec.make(0.2, diag_u, 1.0))
    np.testing.assert_allclose(fit.beta, B, atol=1e-8)


def test_conditional_mean_case_is_ols(diag_u):
    Y, X, _ = _linear_data()
    fit = fit_conditional_linear(Y, X, MQuantileSpec.make(0.5, diag_u, 1e6))
    np.testing.assert_allclose(fit.beta, np.linalg.lstsq(X, Y, rcond=None)[0], atol=1e-9)


def test_conditional_slopes_close_to_B(diag_u):
    Y, X, B = _linear_data(n=3000)
    fit = fit_conditional_linear(Y, X, MQuantileSpec.make(0.2, diag_u, 1.0))
    assert fit.converged
    np.testing.assert_allclose(fit.beta[1:], B[1:], atol=0.15)


def test_conditional_rank_deficiency(diag_u):
    Y, X, _ = _linear_data()
    X = np.column_stack([X, X[:, 1]])
    with pytest.raises(RankDeficiencyError):
        fit_conditional_linear(Y, X, MQuantileSpec.make(0.3, diag_u, 1.0))

import numpy as np
import pytest

from mqrif.exceptions import SingularMatrixError
from mqrif.huber import MQuantileSpec, score_rows
from mqrif.rif import d_matrix, influence, m_matrix, m_matrix_at, rif_covariance
from mqrif.solver import fit_unconditional


def _fd_jacobian_of_mean_score(Y, theta, spec, h=1e-5):
    p = theta.size
    J = np.empty((p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = h
        J[:, j] = (score_rows(Y - (theta + e), spec).mean(axis=0)
                   - score_rows(Y - (theta - e), spec).mean(axis=0)) / (2 * h)
    return J


@pytest.mark.parametrize("tau,c", [(0.25, 1.0), (0.1, 0.3), (0.4, 5.0)])
def test_m_is_minus_full_sample_jacobian(biv, diag_u, tau, c):
    spec = MQuantileSpec.make(tau, diag_u, c)
    fit = fit_unconditional(biv, spec)
    M = m_matrix(biv, fit)
    np.testing.assert_allclose(M, -_fd_jacobian_of_mean_score(biv, fit.theta, spec), atol=1e-5)


def test_analytic_and_central_difference_m_agree(biv, diag_u):
    fit = fit_unconditional(biv, MQuantileSpec.make(0.5, diag_u, 0.0))
    np.testing.assert_allclose(m_matrix(biv, fit, "analytic"), m_matrix(biv, fit), atol=1e-5)


def test_unknown_m_method(biv, diag_u):
    fit = fit_unconditional(biv, MQuantileSpec.make(0.5, diag_u, 1.0))
    with pytest.raises(ValueError):
        m_matrix(biv, fit, "forward")


@pytest.mark.parametrize("tau,c", [(0.5, 1e6), (0.2, 1.0), (0.1, 0.0), (0.7, 2.0)])
def test_delta_sandwich_identity(biv, tau, c):
    fit = fit_unconditional(biv, MQuantileSpec.make(tau, [0.3, -1.0], c))
    R = rif_covariance(biv, fit)
    Minv = np.linalg.inv(R.m_hat)
    scale = max(1.0, np.abs(R.delta_hat).max())
    np.testing.assert_allclose(R.delta_hat, Minv @ R.d_hat @ Minv.T, atol=1e-10 * scale)
    np.testing.assert_allclose(R.theta_cov, Minv @ R.d_hat @ Minv.T / biv.shape[0])
    np.testing.assert_allclose(np.diag(R.r), 1.0)
    assert np.allclose(R.delta_hat, R.delta_hat.T)


def test_mean_case_rif_equals_y(biv, diag_u):
    fit = fit_unconditional(biv, MQuantileSpec.make(0.5, diag_u, 1e6))
    sample = influence(biv, fit)
    np.testing.assert_allclose(sample.rif_values, biv, atol=1e-8)
    R = rif_covariance(biv, fit)
    np.testing.assert_allclose(R.delta_hat, np.cov(biv.T, bias=True), atol=1e-8)


def test_influence_values_average_to_zero(biv, diag_u):
    fit = fit_unconditional(biv, MQuantileSpec.make(0.2, diag_u, 0.8))
    IF = influence(biv, fit).if_values
    np.testing.assert_allclose(IF.mean(axis=0), 0.0, atol=1e-6)


def test_d_matrix_is_score_second_moment(biv, diag_u):
    spec = MQuantileSpec.make(0.3, diag_u, 1.0)
    fit = fit_unconditional(biv, spec)
    S = score_rows(biv - fit.theta, spec)
    np.testing.assert_allclose(d_matrix(biv, fit), S.T @ S / biv.shape[0])


def test_zero_residual_rows_are_skipped():
    pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0], [0.0, -2.0]])
    Y = np.vstack([pts] * 5 + [np.zeros((3, 2))])
    fit = fit_unconditional(Y, MQuantileSpec.make(0.5, [1.0, 0.0], 1.0))
    np.testing.assert_allclose(fit.theta, 0.0, atol=1e-12)
    assert rif_covariance(Y, fit).n_skipped == 3


def test_univariate_c_zero_is_singular():
    y = np.random.default_rng(0).normal(size=31)
    fit = fit_unconditional(y, MQuantileSpec.make(0.3, [1.0], 0.0))
    with pytest.raises(SingularMatrixError):
        m_matrix(y, fit)
    with pytest.raises(SingularMatrixError):
        rif_covariance(y, fit)


def test_collinear_data_singular_m():
    x = np.random.default_rng(1).normal(size=50)
    Y = np.column_stack([x, np.zeros(50)])
    fit = fit_unconditional(Y, MQuantileSpec.make(0.5, [1.0, 0.0], 0.0))
    with pytest.raises(SingularMatrixError):
        m_matrix(Y, fit)


def test_all_zero_residuals_raise():
    with pytest.raises(SingularMatrixError):
        m_matrix_at(np.zeros((4, 2)), np.zeros(2), MQuantileSpec.make(0.5, [1, 0], 1.0))


def test_correlation_independent_and_correlated():
    rng = np.random.default_rng(7)
    Z = rng.normal(size=(10_000, 2))
    spec = MQuantileSpec.make(0.5, [1.0, 1.0], 1e6)
    assert abs(rif_covariance(Z, fit_unconditional(Z, spec)).r[0, 1]) < 0.05
    Zc = Z @ np.linalg.cholesky([[1.0, 0.5], [0.5, 1.0]]).T
    assert rif_covariance(Zc, fit_unconditional(Zc, spec)).r[0, 1] == pytest.approx(0.5, abs=0.05)

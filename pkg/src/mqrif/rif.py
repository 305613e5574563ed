"""Sample M and D matrices, influence / recentered influence values, RIF covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .exceptions import SingularMatrixError
from .huber import MQuantileSpec, default_step
from .solver import MQuantileFit

COND_LIMIT = 1e12


@dataclass
class RifMatrices:
    m_hat: np.ndarray
    d_hat: np.ndarray
    delta_hat: np.ndarray
    r: np.ndarray
    theta_cov: np.ndarray
    m_cond: float
    n_skipped: int


@dataclass
class RifSample:
    if_values: np.ndarray
    rif_values: np.ndarray


def _as_matrix(Y):
    Y = np.ascontiguousarray(np.asarray(Y, dtype=float))
    return Y[:, None] if Y.ndim == 1 else Y


def m_matrix_at(Y, theta, spec: MQuantileSpec, method: str = "central-diff"):
    """``M(theta) = -(1/n) sum_i d score_i / d theta`` over nonzero residual rows.

    Returns ``(M, n_skipped)``.
    """
    Y = _as_matrix(Y)
    R = np.ascontiguousarray(Y - theta)
    if method == "central-diff":
        J, used = kernels.jacobian_sum(R, *spec._kernel_args(), default_step(theta))
    elif method == "analytic":
        from .huber import _analytic_jacobian

        norms = np.linalg.norm(R, axis=1)
        rows = R[norms > spec.huber.epsilon_norm]
        used = rows.shape[0]
        J = sum((_analytic_jacobian(r, spec) for r in rows), np.zeros((spec.p, spec.p)))
    else:
        raise ValueError(f"unknown method {method!r}")
    if used == 0:
        raise SingularMatrixError("every residual is zero; M is undefined")
    return -J / used, Y.shape[0] - used


def _check_m(M):
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrixError(
            f"M matrix is singular (condition number {cond:.3g}); "
            "positive-definiteness assumption fails for this configuration")
    return cond


def m_matrix(Y, fit: MQuantileFit, method: str = "central-diff") -> np.ndarray:
    """Sample Jacobian matrix of the estimating equation at the fitted theta."""
    spec = fit.solved_spec
    if spec.c == 0.0 and spec.p == 1:
        raise SingularMatrixError(
            "c = 0 with p = 1 gives a zero Jacobian; use c > 0 for univariate inference")
    M, _ = m_matrix_at(Y, fit.theta, spec, method)
    _check_m(M)
    return M


def d_matrix(Y, fit: MQuantileFit) -> np.ndarray:
    """``(1/n) sum_i eta_i^2 psi_i psi_i'``."""
    Y = _as_matrix(Y)
    S = kernels.score_matrix(np.ascontiguousarray(Y - fit.theta), *fit.solved_spec._kernel_args())
    return S.T @ S / Y.shape[0]


def influence(Y, fit: MQuantileFit, M: np.ndarray | None = None) -> RifSample:
    """Influence values ``M^{-1} eta_i psi_i`` and their recentered version."""
    Y = _as_matrix(Y)
    if M is None:
        M = m_matrix(Y, fit)
    S = kernels.score_matrix(np.ascontiguousarray(Y - fit.theta), *fit.solved_spec._kernel_args())
    IF = np.linalg.solve(M, S.T).T
    return RifSample(if_values=IF, rif_values=IF + fit.theta)


def correlation_from_cov(C):
    sd = np.sqrt(np.diag(C))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = C / np.outer(sd, sd)
    np.fill_diagonal(r, 1.0)
    return r


def rif_covariance(Y, fit: MQuantileFit) -> RifMatrices:
    """RIF covariance, its correlation, and the sandwich covariance of theta-hat."""
    Y = _as_matrix(Y)
    n = Y.shape[0]
    spec = fit.solved_spec
    if spec.c == 0.0 and spec.p == 1:
        raise SingularMatrixError(
            "c = 0 with p = 1 gives a zero Jacobian; use c > 0 for univariate inference")
    M, skipped = m_matrix_at(Y, fit.theta, spec)
    cond = _check_m(M)
    D = d_matrix(Y, fit)
    IF = influence(Y, fit, M).if_values
    delta = IF.T @ IF / n
    Minv = np.linalg.inv(M)
    return RifMatrices(
        m_hat=M,
        d_hat=D,
        delta_hat=delta,
        r=correlation_from_cov(delta),
        theta_cov=Minv @ D @ Minv.T / n,
        m_cond=cond,
        n_skipped=skipped,
    )

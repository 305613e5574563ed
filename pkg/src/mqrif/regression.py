"""RIF regression: unconditional partial effects and their inference."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import kernels
from .exceptions import (ConvergenceError, DegenerateDataError, MQRIFError,
                         RankDeficiencyError, SingularMatrixError)
from .huber import MQuantileSpec, default_step
from .rif import _as_matrix, _check_m, correlation_from_cov, influence, m_matrix_at
from .solver import IrlsOptions, MQuantileFit, fit_unconditional
from .splines import bspline_basis, knot_vector


@dataclass(frozen=True)
class SplineConfig:
    """Which design columns get a B-spline expansion, and its shape."""

    covariate_indices: tuple = ()
    degree: int = 3
    interior_knots: int = 5

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.interior_knots < 0:
            raise ValueError("interior_knots must be >= 0")
        object.__setattr__(self, "covariate_indices", tuple(int(j) for j in self.covariate_indices))


@dataclass
class UpeFit:
    """Partial effects ``alpha`` (k x p, rows are design columns).

    ``v_hat`` is the covariance of ``vec(alpha)`` scaled by n (column-stacked),
    ``se`` the matching standard errors; both are ``None`` for the spline method.
    """

    alpha: np.ndarray
    v_hat: np.ndarray | None
    se: np.ndarray | None
    spec: MQuantileSpec
    method: str
    omega_x_cond: float
    theta: np.ndarray
    rif_corr: np.ndarray


@dataclass
class BootstrapResult:
    replicates: int
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    se_boot: np.ndarray
    seed: int
    level: float
    n_failed: int
    estimates: np.ndarray


def _check_design(X, n):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != n:
        raise ValueError(f"X has {X.shape[0]} rows, Y has {n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficiencyError("design matrix is not of full column rank")
    return X


def _ols(X, Z):
    n = X.shape[0]
    omega = X.T @ X / n
    coef = np.linalg.solve(omega, X.T @ Z / n)
    return coef, omega


def _rif_and_corr(Y, fit):
    M, _ = m_matrix_at(Y, fit.theta, fit.solved_spec)
    _check_m(M)
    sample = influence(Y, fit, M)
    IF = sample.if_values
    return sample, M, correlation_from_cov(IF.T @ IF / Y.shape[0])


def umqpe_linear(Y, X, fit: MQuantileFit, covariance: bool = True,
                 recentered: bool = True) -> UpeFit:
    """OLS of the RIF rows on ``X``: ``alpha = Omega^{-1} (1/n) sum X_i RIF_i'``."""
    if fit.solved_spec.c == 0.0 and fit.solved_spec.p == 1:
        raise SingularMatrixError("c = 0 with p = 1 gives a zero Jacobian")
    Y = _as_matrix(Y)
    X = _check_design(X, Y.shape[0])
    sample, _, corr = _rif_and_corr(Y, fit)
    alpha, omega = _ols(X, sample.rif_values)
    v_hat = se = None
    if covariance:
        v_hat = asymptotic_covariance(Y, X, fit, recentered=recentered)
        k, p = alpha.shape
        se = np.sqrt(np.clip(np.diag(v_hat), 0.0, None) / Y.shape[0]).reshape((k, p), order="F")
    return UpeFit(alpha=alpha, v_hat=v_hat, se=se, spec=fit.spec, method="linear",
                  omega_x_cond=float(np.linalg.cond(omega)), theta=fit.theta.copy(),
                  rif_corr=corr)


def upe_binary(Y, x_binary, fit: MQuantileFit) -> np.ndarray:
    """Difference of mean RIF between the ``x = 1`` and ``x = 0`` groups."""
    Y = _as_matrix(Y)
    x = np.asarray(x_binary).ravel()
    if x.shape[0] != Y.shape[0]:
        raise ValueError("x_binary must have one entry per row of Y")
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("x_binary must be 0/1")
    ones, zeros = x == 1, x == 0
    if not ones.any() or not zeros.any():
        raise DegenerateDataError("both groups of the binary covariate must be nonempty")
    rif = _rif_and_corr(Y, fit)[0].rif_values
    return rif[ones].mean(axis=0) - rif[zeros].mean(axis=0)


def _intercept_column(X):
    hits = np.nonzero(np.all(X == 1.0, axis=0))[0]
    return int(hits[0]) if hits.size else None


def spline_design(X, cfg: SplineConfig):
    """Expand the configured columns of ``X`` into B-spline bases.

    Returns ``(D, blocks)`` where ``blocks[j]`` lists ``(cols, knots)`` for an
    expanded column ``j`` or ``(col,)`` for a column kept linear. With an
    intercept present, the first basis function of each expansion is dropped.
    """
    X = np.asarray(X, dtype=float)
    icpt = _intercept_column(X)
    for j in cfg.covariate_indices:
        if j == icpt:
            raise ValueError("cannot expand the intercept column")
        if not 0 <= j < X.shape[1]:
            raise IndexError(f"covariate index {j} out of range")
    columns, blocks, pos = [], {}, 0
    for j in range(X.shape[1]):
        if j in cfg.covariate_indices:
            xj = X[:, j]
            n_distinct = np.unique(xj).size
            if n_distinct < cfg.interior_knots + cfg.degree + 1:
                raise RankDeficiencyError(
                    f"column {j} has {n_distinct} distinct values; too few for the basis")
            t = knot_vector(xj, cfg.degree, cfg.interior_knots)
            basis = bspline_basis(xj, t, cfg.degree)
            if icpt is not None:
                basis = basis[:, 1:]
            columns.append(basis)
            blocks[j] = (np.arange(pos, pos + basis.shape[1]), t)
            pos += basis.shape[1]
        else:
            columns.append(X[:, j:j + 1])
            blocks[j] = (pos,)
            pos += 1
    D = np.hstack(columns)
    if np.linalg.matrix_rank(D) < D.shape[1]:
        raise RankDeficiencyError("expanded spline design is not of full column rank")
    return D, blocks


def _spline_alpha(X, Z, cfg):
    D, blocks = spline_design(X, cfg)
    coef, omega = _ols(D, Z)
    k, p = X.shape[1], Z.shape[1]
    alpha = np.empty((k, p))
    icpt = _intercept_column(X)
    drop = 1 if icpt is not None else 0
    for j, blk in blocks.items():
        if len(blk) == 1:
            alpha[j] = coef[blk[0]]
            continue
        cols, t = blk
        dB = bspline_basis(X[:, j], t, cfg.degree, deriv=1)[:, drop:]
        alpha[j] = (dB @ coef[cols]).mean(axis=0)
    if icpt is not None:
        others = [j for j in range(k) if j != icpt]
        fitted_mean = (D @ coef).mean(axis=0)
        alpha[icpt] = fitted_mean - X[:, others].mean(axis=0) @ alpha[others]
    return alpha, omega


def umqpe_splines(Y, X, fit: MQuantileFit, cfg: SplineConfig) -> UpeFit:
    """Average-derivative partial effects from a B-spline regression of the RIF.

    Non-expanded columns keep their linear coefficient; the intercept row is
    the mean fitted RIF minus the covariate means weighted by the effects.
    """
    Y = _as_matrix(Y)
    X = _check_design(X, Y.shape[0])
    sample, _, corr = _rif_and_corr(Y, fit)
    alpha, omega = _spline_alpha(X, sample.rif_values, cfg)
    return UpeFit(alpha=alpha, v_hat=None, se=None, spec=fit.spec, method="spline",
                  omega_x_cond=float(np.linalg.cond(omega)), theta=fit.theta.copy(),
                  rif_corr=corr)


def _vec_beta(Y, X, theta, spec, omega):
    M, _ = m_matrix_at(Y, theta, spec)
    S = kernels.score_matrix(np.ascontiguousarray(Y - theta), *spec._kernel_args())
    IF = np.linalg.solve(M, S.T).T
    beta = np.linalg.solve(omega, X.T @ IF / Y.shape[0])
    return beta.ravel(order="F")


def influence_scores(Y, X, fit: MQuantileFit, recentered: bool = True) -> np.ndarray:
    """Per-observation linear-representation terms ``S_i`` of ``vec(alpha)`` (n x kp).

    ``S_i = G M^{-1} eta_i psi_i + vec(Omega^{-1} X_i z_i')`` where ``G`` is the
    central-difference Jacobian of ``vec(beta(theta))`` (M recomputed at each
    perturbed theta) and ``z_i`` the OLS residual of the influence values.
    With ``recentered=True`` the variability of theta-hat added back in the
    RIF enters through ``vec(Omega^{-1} Xbar IF_i')``; this only touches the
    intercept row when X has an intercept column.
    """
    Y = _as_matrix(Y)
    X = np.asarray(X, dtype=float)
    n, p = Y.shape
    k = X.shape[1]
    spec = fit.solved_spec
    theta = fit.theta
    omega = X.T @ X / n
    omega_inv = np.linalg.inv(omega)

    M, _ = m_matrix_at(Y, theta, spec)
    _check_m(M)
    S = kernels.score_matrix(np.ascontiguousarray(Y - theta), *spec._kernel_args())
    IF = np.linalg.solve(M, S.T).T
    beta = np.linalg.solve(omega, X.T @ IF / n)

    h = default_step(theta)
    G = np.empty((k * p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = h[j]
        G[:, j] = (_vec_beta(Y, X, theta + e, spec, omega)
                   - _vec_beta(Y, X, theta - e, spec, omega)) / (2.0 * h[j])

    A = X @ omega_inv
    Z = IF - X @ beta
    gamma = (Z[:, :, None] * A[:, None, :]).reshape(n, p * k)
    out = IF @ G.T + gamma
    if recentered:
        xbar = omega_inv @ X.mean(axis=0)
        out += (IF[:, :, None] * xbar[None, None, :]).reshape(n, p * k)
    return out


def joint_direction_covariance(Y, X, fits, upes=None, recentered: bool = True) -> np.ndarray:
    """Covariance of the stacked ``vec(alpha)`` over several directions (Jkp x Jkp).

    Block ``(r, s)`` is ``(1/n) sum_i S_i(r) S_i(s)'``. ``upes`` is accepted for
    signature symmetry and only checked for count.
    """
    fits = list(fits)
    if not fits:
        raise ValueError("need at least one fit")
    ref = fits[0].solved_spec
    for f in fits[1:]:
        s = f.solved_spec
        if s.tau != ref.tau or s.huber != ref.huber:
            raise ValueError("all fits must share tau, c and delta")
    if upes is not None and len(upes) != len(fits):
        raise ValueError("one UpeFit per fit expected")
    Y = _as_matrix(Y)
    X = _check_design(X, Y.shape[0])
    S = np.hstack([influence_scores(Y, X, f, recentered) for f in fits])
    return S.T @ S / Y.shape[0]


def asymptotic_covariance(Y, X, fit: MQuantileFit, upe: UpeFit | None = None,
                          recentered: bool = True) -> np.ndarray:
    """Sandwich-type covariance ``(1/n) sum S_i S_i'`` of ``sqrt(n) vec(alpha)``."""
    if upe is not None and upe.method != "linear":
        raise ValueError("asymptotic covariance is available for the linear method only")
    return joint_direction_covariance(Y, X, [fit], recentered=recentered)


def _constant_alpha(Y, X, icpt):
    k, p = X.shape[1], Y.shape[1]
    alpha = np.zeros((k, p))
    alpha[icpt] = Y[0]
    return alpha


def _replicate(Y, X, spec, method, cfg, opts, seed, b):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
    idx = rng.integers(0, Y.shape[0], Y.shape[0])
    Yb, Xb = Y[idx], X[idx]
    icpt = _intercept_column(Xb)
    if np.all(Yb == Yb[0]) and icpt is not None:
        # every influence value is zero, so the RIF is the constant itself
        return _constant_alpha(Yb, Xb, icpt)
    fit = fit_unconditional(Yb, spec, opts)
    if not fit.converged:
        raise ConvergenceError("replicate did not converge")
    if method == "linear":
        return umqpe_linear(Yb, Xb, fit, covariance=False).alpha
    return umqpe_splines(Yb, Xb, fit, cfg).alpha


def bootstrap_ci(Y, X, spec: MQuantileSpec, method: str = "linear", B: int = 1000,
                 level: float = 0.95, seed: int = 0, cfg: SplineConfig | None = None,
                 opts: IrlsOptions | None = None, n_jobs: int = 1) -> BootstrapResult:
    """Pairs bootstrap percentile intervals for the partial effects.

    Replicate ``b`` draws from ``SeedSequence(seed, spawn_key=(b,))`` so the
    output does not depend on ``n_jobs``. Failed replicates are dropped; more
    than 5% failures is an error.
    """
    if B < 100:
        raise ValueError("B must be >= 100")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if method not in ("linear", "spline"):
        raise ValueError(f"unknown method {method!r}")
    if method == "spline" and cfg is None:
        raise ValueError("spline method needs a SplineConfig")
    Y = _as_matrix(Y)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]

    def one(b):
        try:
            return _replicate(Y, X, spec, method, cfg, opts, seed, b)
        except (MQRIFError, np.linalg.LinAlgError):
            return None

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, range(B)))
    else:
        results = [one(b) for b in range(B)]
    ok = [a for a in results if a is not None]
    failed = B - len(ok)
    if failed > 0.05 * B:
        raise ConvergenceError(f"{failed} of {B} bootstrap replicates failed")
    draws = np.stack(ok)
    lo, hi = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    return BootstrapResult(
        replicates=len(ok),
        ci_lower=np.quantile(draws, lo, axis=0),
        ci_upper=np.quantile(draws, hi, axis=0),
        se_boot=draws.std(axis=0, ddof=1),
        seed=seed,
        level=level,
        n_failed=failed,
        estimates=draws,
    )


def _resid_sscp(D, Z):
    coef = np.linalg.lstsq(D, Z, rcond=None)[0]
    E = Z - D @ coef
    return E.T @ E


def pillai_trace(Z, reduced, full):
    """Pillai's trace for ``full`` vs nested ``reduced`` designs with F approximation.

    Returns ``(V, F, df1, df2, p_value)``.
    """
    n, p = Z.shape
    k_full = np.linalg.matrix_rank(full)
    q = k_full - np.linalg.matrix_rank(reduced)
    if q <= 0:
        return 0.0, 0.0, 0, 0, 1.0
    E = _resid_sscp(full, Z)
    H = _resid_sscp(reduced, Z) - E
    V = float(np.trace(np.linalg.solve(H + E, H)))
    s = min(p, q)
    m = (abs(p - q) - 1) / 2.0
    nn = (n - k_full - p - 1) / 2.0
    df1 = s * (2 * m + s + 1)
    df2 = s * (2 * nn + s + 1)
    F = (2 * nn + s + 1) / (2 * m + s + 1) * V / (s - V)
    return V, F, df1, df2, float(stats.f.sf(F, df1, df2))


def linearity_test(Y, X, fit: MQuantileFit, cfg: SplineConfig):
    """Pillai-trace test of a linear RIF regression against its spline expansion.

    Returns ``(statistic, approx_p)``.
    """
    Y = _as_matrix(Y)
    X = _check_design(X, Y.shape[0])
    rif = _rif_and_corr(Y, fit)[0].rif_values
    D, _ = spline_design(X, cfg)
    V, _, _, _, pval = pillai_trace(rif, X, D)
    return V, pval

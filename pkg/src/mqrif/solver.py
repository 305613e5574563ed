"""IRLS solvers for unconditional and linear conditional multivariate M-quantiles."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .exceptions import DegenerateDataError, RankDeficiencyError
from .huber import MQuantileSpec, eta_weight

MAX_HALVINGS = 20


@dataclass(frozen=True)
class IrlsOptions:
    """``init`` is ``"median"``, ``"mean"`` or a starting vector/matrix."""

    max_iter: int = 200
    tol: float = 1e-8
    init: object = "median"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


@dataclass
class MQuantileFit:
    spec: MQuantileSpec
    theta: np.ndarray
    iterations: int
    eq_norm: float
    converged: bool
    # equation actually solved (the reflected one when tau > 1/2)
    solved_spec: MQuantileSpec = None

    def __post_init__(self):
        if self.solved_spec is None:
            self.solved_spec = self.spec


@dataclass
class ConditionalFit:
    spec: MQuantileSpec
    beta: np.ndarray
    iterations: int
    eq_norm: float
    converged: bool
    solved_spec: MQuantileSpec = field(default=None)

    def __post_init__(self):
        if self.solved_spec is None:
            self.solved_spec = self.spec


def reflect_spec(spec: MQuantileSpec) -> MQuantileSpec:
    """Map ``(tau, u)`` to ``(1 - tau, -u)``; the M-quantile is unchanged."""
    return replace(spec, tau=1.0 - spec.tau, u=-spec.u)


def _check_Y(Y, spec):
    Y = np.ascontiguousarray(np.asarray(Y, dtype=float))
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2:
        raise ValueError("Y must be an n x p matrix")
    n, p = Y.shape
    if p != spec.p:
        raise ValueError(f"direction has length {spec.p} but Y has {p} columns")
    if n < p + 1:
        raise DegenerateDataError(f"need at least p+1={p + 1} rows, got {n}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("Y contains non-finite entries")
    return Y


def _eq_norm(Y, theta, spec):
    G, m, nearest = kernels.score_sum(Y, theta, *spec._kernel_args())
    g = float(np.linalg.norm(G))
    if spec.c == 0.0 and m and g > 0.0:
        nu = -G / g
        cap = m * eta_weight(float(np.clip(nu @ spec.u, -1, 1)), spec.tau,
                             spec.huber.delta, spec.huber.eta_form)
        g = max(g - cap, 0.0)
    return g / Y.shape[0], nearest


def equation_norm(Y, theta, spec: MQuantileSpec) -> float:
    """Norm of the sample mean of the scores at ``theta``.

    At c = 0 the score is set-valued at a zero residual (any ``eta * v`` with
    ``|v| <= 1``); zero rows then absorb as much of the remaining sum as they can,
    so a root sitting exactly on a data point reports a zero norm.
    """
    Y = np.ascontiguousarray(np.asarray(Y, dtype=float))
    return _eq_norm(Y, np.asarray(theta, dtype=float), spec)[0]


def _initial_theta(Y, opts):
    if isinstance(opts.init, str):
        if opts.init == "median":
            return np.median(Y, axis=0)
        if opts.init == "mean":
            return Y.mean(axis=0)
        raise ValueError(f"unknown init {opts.init!r}")
    theta = np.asarray(opts.init, dtype=float).copy()
    if theta.shape != (Y.shape[1],):
        raise ValueError("initial theta has the wrong shape")
    return theta


def _solve_location(Y, spec, opts):
    args = spec._kernel_args()
    tol = opts.tol
    theta = _initial_theta(Y, opts)
    g, _ = _eq_norm(Y, theta, spec)
    snap = spec.c == 0.0
    it = 0
    for it in range(1, opts.max_iter + 1):
        target, wsum = kernels.irls_target(Y, theta, *args)
        if not wsum > 0:
            break
        step = target - theta
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = theta + lam * step
            g_cand, nearest = _eq_norm(Y, cand, spec)
            if g_cand <= g:
                break
            lam *= 0.5
        moved = float(np.max(np.abs(cand - theta)))
        theta, g = cand, g_cand
        if snap:
            # c = 0 roots may sit exactly on an observation
            g_k, _ = _eq_norm(Y, Y[nearest], spec)
            if g_k <= tol and g_k <= g:
                return Y[nearest].copy(), it, g_k, True
        if g <= tol * 1e-3:
            return theta, it, g, True
        if moved <= tol * max(1.0, float(np.max(np.abs(theta)))) and g <= 10 * tol:
            return theta, it, g, True
    return theta, it, g, False


def fit_unconditional(Y, spec: MQuantileSpec, opts: IrlsOptions | None = None,
                      reflect: bool = True) -> MQuantileFit:
    """Solve the sample estimating equation for the (tau, u) M-quantile by IRLS.

    Each iteration is a weighted mean with weights
    ``eta_i / max(c, |r_i|)``, halving the step while the equation norm grows.
    Levels above 1/2 are solved as ``(1 - tau, -u)`` unless ``reflect=False``.
    """
    opts = opts or IrlsOptions()
    Y = _check_Y(Y, spec)
    if np.all(Y == Y[0]):
        raise DegenerateDataError("all rows of Y are identical")
    solved = reflect_spec(spec) if (reflect and spec.tau > 0.5) else spec
    theta, it, g, ok = _solve_location(Y, solved, opts)
    return MQuantileFit(spec=spec, theta=theta, iterations=it, eq_norm=g,
                        converged=ok, solved_spec=solved)


def _conditional_eq_norm(Y, X, beta, spec):
    S = kernels.score_matrix(np.ascontiguousarray(Y - X @ beta), *spec._kernel_args())
    return float(np.linalg.norm(X.T @ S)) / Y.shape[0]


def fit_conditional_linear(Y, X, spec: MQuantileSpec, opts: IrlsOptions | None = None,
                           reflect: bool = True) -> ConditionalFit:
    """Linear conditional M-quantile regression ``theta(x) = beta' x`` by IRLS.

    Each step is a weighted least-squares solve with the row weights of the
    unconditional solver evaluated at the current residuals.
    """
    opts = opts or IrlsOptions()
    Y = _check_Y(Y, spec)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("X must be n x k with the same n as Y")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficiencyError("design matrix is not of full column rank")
    solved = reflect_spec(spec) if (reflect and spec.tau > 0.5) else spec
    args = solved._kernel_args()
    tol = opts.tol
    if isinstance(opts.init, str):
        beta = np.linalg.lstsq(X, Y, rcond=None)[0]
    else:
        beta = np.asarray(opts.init, dtype=float).copy()
    g = _conditional_eq_norm(Y, X, beta, solved)
    converged = g <= tol * 1e-3
    it = 0
    while not converged and it < opts.max_iter:
        it += 1
        R = np.ascontiguousarray(Y - X @ beta)
        w = kernels.irls_weights(R, *args)
        Xw = X * w[:, None]
        try:
            target = np.linalg.solve(X.T @ Xw, Xw.T @ Y)
        except np.linalg.LinAlgError:
            break
        step = target - beta
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + lam * step
            g_cand = _conditional_eq_norm(Y, X, cand, solved)
            if g_cand <= g:
                break
            lam *= 0.5
        moved = float(np.max(np.abs(cand - beta)))
        beta, g = cand, g_cand
        scale = max(1.0, float(np.max(np.abs(beta))))
        if g <= tol * 1e-3 or (moved <= tol * scale and g <= 10 * tol):
            converged = True
    return ConditionalFit(spec=spec, beta=beta, iterations=it, eq_norm=g,
                          converged=converged, solved_spec=solved)

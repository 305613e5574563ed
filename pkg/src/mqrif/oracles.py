"""Reference oracles and Monte Carlo drivers.

Nothing here calls into the solver or the RIF code for its numerics: the
brute-force root finder and the univariate oracles carry their own score
arithmetic, so agreement with the IRLS path is real evidence. ``run_coverage``
is a driver and deliberately exercises the production estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import ConvergenceError, MQRIFError

KINDS = ("gaussian-linear", "contaminated", "correlated-gaussian")


def _default_B():
    return np.array([[1.0, -0.5], [0.5, 1.0], [-1.0, 0.25]])


@dataclass
class DgpConfig:
    """Linear data generator ``Y = X B + noise_scale * eps``.

    ``X`` is an intercept column followed by ``k - 1`` standard normal
    covariates. ``correlated-gaussian`` gives ``eps`` equicorrelation
    ``correlation``; ``contaminated`` adds standard Cauchy (t with one degree
    of freedom) noise to ``round(contamination_rate * n)`` random rows.
    """

    kind: str = "gaussian-linear"
    n: int = 2000
    B: np.ndarray = field(default_factory=_default_B)
    noise_scale: float = 1.0
    correlation: float = 0.0
    contamination_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 10:
            raise ValueError("n must be >= 10")
        if not 0.0 <= self.contamination_rate < 1.0:
            raise ValueError("contamination_rate must lie in [0, 1)")
        if not abs(self.correlation) < 1.0:
            raise ValueError("|correlation| must be < 1")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")

    @property
    def k(self) -> int:
        return self.B.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]


def simulate(dgp: DgpConfig, rng: np.random.Generator | None = None):
    """Draw ``(Y, X)``; uses ``default_rng(dgp.seed)`` unless ``rng`` is given."""
    rng = np.random.default_rng(dgp.seed) if rng is None else rng
    n, k, p = dgp.n, dgp.k, dgp.p
    X = np.column_stack([np.ones(n), rng.standard_normal((n, k - 1))])
    eps = rng.standard_normal((n, p))
    if dgp.kind == "correlated-gaussian" and p > 1:
        rho = dgp.correlation
        cov = np.full((p, p), rho) + (1.0 - rho) * np.eye(p)
        eps = eps @ np.linalg.cholesky(cov).T
    Y = X @ dgp.B + dgp.noise_scale * eps
    if dgp.kind == "contaminated":
        m = int(round(dgp.contamination_rate * n))
        rows = rng.permutation(n)[:m]
        Y[rows] += dgp.noise_scale * rng.standard_cauchy((m, p))
    return Y, X


# -- independent score arithmetic ------------------------------------------------

def _eta(cos_phi, tau, delta, printed):
    cos_phi = np.clip(cos_phi, -1.0, 1.0)
    zeta = 1.0 - 2.0 * tau
    upper = 1.0 - cos_phi
    lower = upper if printed else 1.0 + cos_phi
    if delta != 1.0:
        upper, lower = upper ** delta, lower ** delta
    return np.where(cos_phi > 0.0, zeta * upper + 2.0 * tau,
                    2.0 * (1.0 - tau) - zeta * lower)


def _norm_at(Y, thetas, spec, chunk=2048):
    """Norm of the mean score over rows of ``Y`` at each row of ``thetas``."""
    tau, u = spec.tau, np.asarray(spec.u)
    c, delta = spec.huber.c, spec.huber.delta
    eps = spec.huber.epsilon_norm
    printed = spec.huber.eta_form == "printed"
    n, p = Y.shape
    out = np.empty(thetas.shape[0])
    for s in range(0, thetas.shape[0], chunk):
        T = thetas[s:s + chunk]
        # one (g, n) residual plane per coordinate
        R = [Y[None, :, j] - T[:, j, None] for j in range(p)]
        norm = np.sqrt(sum(r * r for r in R))
        dot = sum(r * uj for r, uj in zip(R, u))
        live = norm > eps
        safe = np.where(live, norm, 1.0)
        eta = _eta(dot / safe, tau, delta, printed)
        scale = np.where(live, eta / np.maximum(safe, c), 0.0)
        G = [(r * scale).sum(axis=1) / n for r in R]
        out[s:s + chunk] = np.sqrt(sum(g * g for g in G))
    return out


def brute_force_theta(Y, spec, search_box=None, grid_step: float = 0.05) -> np.ndarray:
    """Exhaustive grid search for the root of the sample estimating equation.

    ``search_box`` is a sequence of ``(lo, hi)`` pairs, one per coordinate
    (default: the data range padded by two steps). The best grid point is
    refined by a ternary search of the equation norm over ``+-grid_step``
    along each coordinate in turn. Raises if the grid minimiser sits on the
    box boundary, which means the box was too small.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    p = Y.shape[1]
    if p > 2:
        raise ValueError("grid search is limited to p <= 2")
    if search_box is None:
        pad = 2.0 * grid_step
        search_box = [(lo - pad, hi + pad) for lo, hi in zip(Y.min(axis=0), Y.max(axis=0))]
    axes = [np.arange(lo, hi + 0.5 * grid_step, grid_step) for lo, hi in search_box]
    mesh = np.meshgrid(*axes, indexing="ij")
    cand = np.column_stack([g.ravel() for g in mesh])
    vals = _norm_at(Y, cand, spec)
    best = int(np.argmin(vals))
    idx = np.unravel_index(best, tuple(a.size for a in axes))
    for j, a in enumerate(axes):
        if idx[j] in (0, a.size - 1):
            raise MQRIFError("search box too small: minimiser on the boundary")
    theta = cand[best].copy()

    for j in range(p):
        lo, hi = theta[j] - grid_step, theta[j] + grid_step
        for _ in range(60):
            a, b = lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0
            pts = np.repeat(theta[None, :], 2, axis=0)
            pts[0, j], pts[1, j] = a, b
            fa, fb = _norm_at(Y, pts, spec)
            if fa <= fb:
                hi = b
            else:
                lo = a
        trial = theta.copy()
        trial[j] = 0.5 * (lo + hi)
        if _norm_at(Y, np.stack([trial, theta]), spec)[0] <= _norm_at(Y, theta[None], spec)[0]:
            theta = trial
    return theta


def univariate_quantile_oracle(y, tau: float) -> float:
    """Order statistic with 1-based index ``ceil(n * tau)``."""
    y = np.sort(np.asarray(y, dtype=float).ravel())
    n = y.size
    # guard against n * tau landing a hair above an integer
    k = max(1, math.ceil(n * tau - 1e-9))
    return float(y[min(k, n) - 1])


def univariate_expectile_oracle(y, tau: float, tol: float = 1e-12, damping: float = 0.5,
                                max_iter: int = 10_000) -> float:
    """Root of ``sum w_i (y_i - e) = 0`` with ``w = 2 tau`` above, ``2 (1 - tau)`` below.

    Damped fixed point ``e <- e + damping * (weighted mean - e)``.
    """
    y = np.asarray(y, dtype=float).ravel()
    e = float(y.mean())
    for _ in range(max_iter):
        w = np.where(y > e, 2.0 * tau, 2.0 * (1.0 - tau))
        step = float((w * y).sum() / w.sum()) - e
        if abs(step) <= tol * max(1.0, abs(e)):
            break
        e += damping * step
    return e


# -- Monte Carlo coverage --------------------------------------------------------

def _coverage_rep(dgp, spec, z, rep):
    # production estimators; imported here to keep the oracle arithmetic above self-contained
    from .regression import umqpe_linear
    from .solver import fit_unconditional

    rng = np.random.default_rng(np.random.SeedSequence(dgp.seed, spawn_key=(rep,)))
    Y, X = simulate(dgp, rng)
    fit = fit_unconditional(Y, spec)
    if not fit.converged:
        raise ConvergenceError("replication did not converge")
    upe = umqpe_linear(Y, X, fit)
    diff = np.abs(upe.alpha[1:] - dgp.B[1:])
    return diff <= z * upe.se[1:]


def run_coverage(dgp: DgpConfig, spec, reps: int = 500, level: float = 0.95,
                 n_jobs: int = 1) -> float:
    """Share of slope entries whose ``alpha +- z se`` interval covers the true ``B``.

    Only slope rows are scored: under a location-shift linear model a shift in
    covariate j moves every M-quantile by ``B_j``, while the intercept row of
    alpha depends on the error law. Replication ``r`` uses the stream
    ``SeedSequence(dgp.seed, spawn_key=(r,))``; more than 2% failed
    replications raises.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not 0.0 <= level < 1.0:
        raise ValueError("level must lie in [0, 1)")
    if dgp.k < 2:
        raise ValueError("coverage needs at least one slope row")
    z = float(stats.norm.ppf(0.5 + level / 2.0))

    def one(r):
        try:
            return _coverage_rep(dgp, spec, z, r)
        except (MQRIFError, np.linalg.LinAlgError):
            return None

    if n_jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            hits = list(pool.map(one, range(reps)))
    else:
        hits = [one(r) for r in range(reps)]
    ok = [h for h in hits if h is not None]
    failed = reps - len(ok)
    if failed > 0.02 * reps:
        raise ConvergenceError(f"{failed} of {reps} coverage replications failed")
    return float(np.mean(np.stack(ok)))

"""K-fold cross-validation of the Huber tuning constant."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import MQRIFError
from .huber import MQuantileSpec
from .solver import IrlsOptions, fit_unconditional

C_MIN = 0.1


@dataclass
class CvResult:
    grid: np.ndarray
    cv_scores: np.ndarray
    c_star: float
    K: int
    fold_assignment: np.ndarray
    seed: int
    failed: np.ndarray


def c_grid(Y, n_grid: int = 200) -> np.ndarray:
    """Equally spaced candidates from 0.1 to the largest row norm of ``Y``."""
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    Y = np.asarray(Y, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    c_max = float(np.max(np.linalg.norm(Y, axis=1)))
    if not c_max > C_MIN:
        raise ValueError(f"largest row norm {c_max:.3g} does not exceed c_min={C_MIN}")
    return np.linspace(C_MIN, c_max, n_grid)


def fold_assignment(n: int, K: int, seed: int) -> np.ndarray:
    """Seeded shuffle into K folds whose sizes differ by at most one."""
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.int64)
    folds[rng.permutation(n)] = np.arange(n) % K
    return folds


def cross_validate(Y, tau, u, K: int = 5, grid=None, seed: int = 0, *, delta: float = 1.0,
                   n_grid: int = 200, opts: IrlsOptions | None = None,
                   n_jobs: int = 1) -> CvResult:
    """Pick ``c`` minimising the held-out squared prediction error of theta-hat.

    Fits are cold-started from the componentwise median. A grid value whose
    fit fails on any fold is excluded from the argmin; ties go to the smaller c.
    """
    Y = np.asarray(Y, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    n = Y.shape[0]
    if K < 2:
        raise ValueError("K must be >= 2")
    if n < 2 * K:
        raise ValueError(f"need n >= 2K = {2 * K}, got {n}")
    grid = c_grid(Y, n_grid) if grid is None else np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing")
    folds = fold_assignment(n, K, seed)
    base = MQuantileSpec.make(tau, u, 0.0, delta)

    def score_c(c):
        spec = base.with_c(c)
        total = 0.0
        for k in range(K):
            test = folds == k
            try:
                fit = fit_unconditional(Y[~test], spec, opts)
            except (MQRIFError, np.linalg.LinAlgError):
                return np.nan
            if not fit.converged:
                return np.nan
            resid = Y[test] - fit.theta
            total += float(np.sum(resid * resid))
        return total / n

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            scores = np.array(list(pool.map(score_c, grid)))
    else:
        scores = np.array([score_c(c) for c in grid])
    failed = ~np.isfinite(scores)
    if failed.all():
        raise MQRIFError("every grid value failed to fit on some fold")
    if failed.any():
        warnings.warn(f"{int(failed.sum())} grid value(s) excluded after fold-fit failures",
                      RuntimeWarning, stacklevel=2)
    best = int(np.argmin(np.where(failed, np.inf, scores)))
    return CvResult(grid=grid, cv_scores=scores, c_star=float(grid[best]), K=K,
                    fold_assignment=folds, seed=seed, failed=failed)

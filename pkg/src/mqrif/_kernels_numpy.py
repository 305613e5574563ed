"""Vectorised numpy kernels. Reference path, and the fallback when numba is off."""

import numpy as np


def eta_vec(cos_phi, tau, delta, printed):
    cos_phi = np.clip(cos_phi, -1.0, 1.0)
    zeta = 1.0 - 2.0 * tau
    upper = (1.0 - cos_phi) ** delta * zeta + 2.0 * tau
    if printed:
        lower = -((1.0 - cos_phi) ** delta) * zeta + 2.0 * (1.0 - tau)
    else:
        lower = -((1.0 + cos_phi) ** delta) * zeta + 2.0 * (1.0 - tau)
    return np.where(cos_phi > 0.0, upper, lower)


def _norms_cos(R, u, eps):
    norms = np.sqrt(np.einsum("ij,ij->i", R, R))
    safe = np.where(norms > eps, norms, 1.0)
    cos_phi = np.where(norms > eps, (R @ u) / safe, 0.0)
    return norms, safe, cos_phi


def score_matrix(R, u, tau, c, delta, eps, printed):
    norms, safe, cos_phi = _norms_cos(R, u, eps)
    eta = eta_vec(cos_phi, tau, delta, printed)
    denom = np.where(norms < c, c, safe)
    scale = np.where(norms > eps, eta / denom, 0.0)
    return R * scale[:, None]


def irls_weights(R, u, tau, c, delta, eps, printed):
    norms, safe, cos_phi = _norms_cos(R, u, eps)
    eta = eta_vec(cos_phi, tau, delta, printed)
    denom = np.where(norms < c, c, safe)
    w = eta / denom
    zero_w = 1.0 / max(c, eps) if c > 0.0 else 0.0
    return np.where(norms > eps, w, zero_w)


def jacobian_sum(R, u, tau, c, delta, eps, printed, h):
    """Sum over rows of d score / d theta by central differences.

    Rows with a zero residual are skipped; returns ``(J, n_used)``.
    Rows closer than ``4 * max(h)`` to the origin use a shrunken step so the
    stencil never crosses the singular point.
    """
    n, p = R.shape
    norms = np.sqrt(np.einsum("ij,ij->i", R, R))
    keep = norms > eps
    Rk = R[keep]
    hmax = np.max(h)
    shrink = np.minimum(1.0, norms[keep] / (4.0 * hmax))
    J = np.zeros((p, p))
    for j in range(p):
        step = h[j] * shrink
        E = np.zeros_like(Rk)
        E[:, j] = step
        # theta + h e_j shifts the residual by -h e_j
        fwd = score_matrix(Rk - E, u, tau, c, delta, eps, printed)
        bwd = score_matrix(Rk + E, u, tau, c, delta, eps, printed)
        J[:, j] = ((fwd - bwd) / (2.0 * step[:, None])).sum(axis=0)
    return J, int(keep.sum())


def irls_target(Y, theta, u, tau, c, delta, eps, printed):
    """Weighted mean of the rows of ``Y`` under IRLS weights at ``theta``."""
    w = irls_weights(Y - theta, u, tau, c, delta, eps, printed)
    wsum = w.sum()
    if wsum > 0:
        return (w @ Y) / wsum, wsum
    return theta.copy(), wsum


def score_sum(Y, theta, u, tau, c, delta, eps, printed):
    """Return ``(sum of scores, #zero residuals, index of nearest row)``."""
    R = Y - theta
    S = score_matrix(R, u, tau, c, delta, eps, printed)
    norms = np.sqrt(np.einsum("ij,ij->i", R, R))
    return S.sum(axis=0), int(np.count_nonzero(norms <= eps)), int(np.argmin(norms))

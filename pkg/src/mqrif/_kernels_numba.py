"""Row-loop kernels compiled with numba. Same signatures as ``_kernels_numpy``.

Loops index ``R[i, j]`` directly; per-row slices allocate views and cost more
than the arithmetic at small p.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _eta(cos_phi, tau, delta, printed):
    if cos_phi > 1.0:
        cos_phi = 1.0
    elif cos_phi < -1.0:
        cos_phi = -1.0
    zeta = 1.0 - 2.0 * tau
    if cos_phi > 0.0:
        b = 1.0 - cos_phi
        return (b if delta == 1.0 else b ** delta) * zeta + 2.0 * tau
    b = (1.0 - cos_phi) if printed else (1.0 + cos_phi)
    return -(b if delta == 1.0 else b ** delta) * zeta + 2.0 * (1.0 - tau)


@njit(cache=True)
def eta_vec(cos_phi, tau, delta, printed):
    out = np.empty(cos_phi.shape[0])
    for i in range(cos_phi.shape[0]):
        out[i] = _eta(cos_phi[i], tau, delta, printed)
    return out


@njit(cache=True, inline="always")
def _scale(norm, dot, tau, c, delta, eps, printed):
    """Factor multiplying the residual in its score; 0 for a zero residual."""
    if norm <= eps:
        return 0.0
    eta = _eta(dot / norm, tau, delta, printed)
    return eta / c if norm < c else eta / norm


@njit(cache=True)
def score_matrix(R, u, tau, c, delta, eps, printed):
    n, p = R.shape
    out = np.empty((n, p))
    for i in range(n):
        ss = 0.0
        dot = 0.0
        for j in range(p):
            ss += R[i, j] * R[i, j]
            dot += R[i, j] * u[j]
        s = _scale(math.sqrt(ss), dot, tau, c, delta, eps, printed)
        for j in range(p):
            out[i, j] = R[i, j] * s
    return out


@njit(cache=True)
def irls_weights(R, u, tau, c, delta, eps, printed):
    n, p = R.shape
    w = np.empty(n)
    zero_w = 1.0 / max(c, eps) if c > 0.0 else 0.0
    for i in range(n):
        ss = 0.0
        dot = 0.0
        for j in range(p):
            ss += R[i, j] * R[i, j]
            dot += R[i, j] * u[j]
        norm = math.sqrt(ss)
        w[i] = zero_w if norm <= eps else _scale(norm, dot, tau, c, delta, eps, printed)
    return w


@njit(cache=True)
def jacobian_sum(R, u, tau, c, delta, eps, printed, h):
    n, p = R.shape
    J = np.zeros((p, p))
    hmax = 0.0
    for j in range(p):
        hmax = max(hmax, h[j])
    used = 0
    for i in range(n):
        ss = 0.0
        dot = 0.0
        for q in range(p):
            ss += R[i, q] * R[i, q]
            dot += R[i, q] * u[q]
        norm = math.sqrt(ss)
        if norm <= eps:
            continue
        used += 1
        shrink = min(1.0, norm / (4.0 * hmax))
        for j in range(p):
            step = h[j] * shrink
            rj = R[i, j]
            # theta + step e_j moves the residual by -step e_j
            ss_f = ss - rj * rj + (rj - step) * (rj - step)
            ss_b = ss - rj * rj + (rj + step) * (rj + step)
            s_f = _scale(math.sqrt(ss_f), dot - step * u[j], tau, c, delta, eps, printed)
            s_b = _scale(math.sqrt(ss_b), dot + step * u[j], tau, c, delta, eps, printed)
            inv = 1.0 / (2.0 * step)
            for q in range(p):
                rf = R[i, q] - step if q == j else R[i, q]
                rb = R[i, q] + step if q == j else R[i, q]
                J[q, j] += (rf * s_f - rb * s_b) * inv
    return J, used


@njit(cache=True)
def irls_target(Y, theta, u, tau, c, delta, eps, printed):
    n, p = Y.shape
    acc = np.zeros(p)
    wsum = 0.0
    zero_w = 1.0 / max(c, eps) if c > 0.0 else 0.0
    for i in range(n):
        ss = 0.0
        dot = 0.0
        for j in range(p):
            d = Y[i, j] - theta[j]
            ss += d * d
            dot += d * u[j]
        norm = math.sqrt(ss)
        w = zero_w if norm <= eps else _scale(norm, dot, tau, c, delta, eps, printed)
        wsum += w
        for j in range(p):
            acc[j] += w * Y[i, j]
    if wsum > 0.0:
        return acc / wsum, wsum
    return theta.copy(), wsum


@njit(cache=True)
def score_sum(Y, theta, u, tau, c, delta, eps, printed):
    n, p = Y.shape
    G = np.zeros(p)
    n_zero = 0
    best = 0
    best_norm = np.inf
    for i in range(n):
        ss = 0.0
        dot = 0.0
        for j in range(p):
            d = Y[i, j] - theta[j]
            ss += d * d
            dot += d * u[j]
        norm = math.sqrt(ss)
        if norm < best_norm:
            best_norm = norm
            best = i
        if norm <= eps:
            n_zero += 1
            continue
        s = _scale(norm, dot, tau, c, delta, eps, printed)
        for j in range(p):
            G[j] += (Y[i, j] - theta[j]) * s
    return G, n_zero, best

"""Clamped regression B-spline bases and their first derivatives."""

from __future__ import annotations

import warnings

import numpy as np


def knot_vector(x, degree: int = 3, interior_knots: int = 5) -> np.ndarray:
    """Clamped knots at the data range with interior knots at equally spaced quantiles.

    Duplicate interior knots (heavily tied data) are collapsed with a warning.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if interior_knots < 0:
        raise ValueError("interior_knots must be >= 0")
    x = np.asarray(x, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if not hi > lo:
        raise ValueError("cannot build a spline basis on a constant covariate")
    probs = np.arange(1, interior_knots + 1) / (interior_knots + 1)
    inner = np.quantile(x, probs)
    kept = np.unique(inner)
    kept = kept[(kept > lo) & (kept < hi)]
    if kept.size < interior_knots:
        warnings.warn(
            f"collapsed {interior_knots - kept.size} duplicate interior knot(s)",
            RuntimeWarning, stacklevel=2)
    return np.concatenate([np.full(degree + 1, lo), kept, np.full(degree + 1, hi)])


def _basis0(x, t):
    nb = t.size - 1
    B = np.zeros((x.size, nb))
    # half-open spans; the right end belongs to the last non-empty span
    idx = np.searchsorted(t, x, side="right") - 1
    last = np.max(np.nonzero(t[1:] > t[:-1])[0])
    idx = np.clip(idx, 0, last)
    idx = np.where(x >= t[-1], last, idx)
    B[np.arange(x.size), idx] = 1.0
    return B


def _div(num, den):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den != 0)
    return out


def bspline_basis(x, t, degree: int, deriv: int = 0) -> np.ndarray:
    """Evaluate all ``len(t) - degree - 1`` basis functions (or first derivatives)."""
    if deriv not in (0, 1):
        raise ValueError("only deriv 0 or 1 supported")
    x = np.asarray(x, dtype=float)
    B = _basis0(x, t)
    target = degree - deriv
    for k in range(1, target + 1):
        nb = t.size - k - 1
        left = _div(x[:, None] - t[None, :nb], (t[k:k + nb] - t[:nb])[None, :])
        right = _div(t[None, k + 1:k + 1 + nb] - x[:, None],
                     (t[k + 1:k + 1 + nb] - t[1:1 + nb])[None, :])
        B = left * B[:, :nb] + right * B[:, 1:nb + 1]
    if deriv == 0:
        return B
    k = degree
    nb = t.size - k - 1
    a = _div(np.full(nb, float(k)), t[k:k + nb] - t[:nb])
    b = _div(np.full(nb, float(k)), t[k + 1:k + 1 + nb] - t[1:1 + nb])
    return B[:, :nb] * a[None, :] - B[:, 1:nb + 1] * b[None, :]

"""M-quantile regions traced by sweeping the direction over the unit sphere."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import MQRIFError
from .huber import MQuantileSpec
from .solver import IrlsOptions, fit_unconditional


@dataclass
class ContourSet:
    tau: float
    c: float
    directions: np.ndarray
    vertices: np.ndarray
    converged_flags: np.ndarray

    @property
    def p(self) -> int:
        return self.vertices.shape[1]


def direction_grid(p: int, m: int, seed: int | None = 0) -> np.ndarray:
    """``m`` unit directions: equally spaced angles for p=2, Gaussian draws otherwise."""
    if m < 3:
        raise ValueError("need m >= 3 directions")
    if p < 2:
        raise ValueError("directions sweep needs p >= 2")
    if p == 2:
        ang = 2.0 * np.pi * np.arange(m) / m
        return np.column_stack([np.cos(ang), np.sin(ang)])
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((m, p))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def contour(Y, tau: float, c: float, m: int = 360, seed: int | None = 0, *,
            directions=None, delta: float = 1.0, warm_start: bool = True,
            opts: IrlsOptions | None = None) -> ContourSet:
    """Fit theta(tau, u) for each direction; failures are flagged, not raised.

    With ``warm_start`` each solve starts from the previous direction's
    solution and retries from the median if that does not converge.
    """
    Y = np.asarray(Y, dtype=float)
    U = direction_grid(Y.shape[1], m, seed) if directions is None else np.asarray(directions, float)
    opts = opts or IrlsOptions()
    verts = np.full((U.shape[0], Y.shape[1]), np.nan)
    flags = np.zeros(U.shape[0], dtype=bool)
    prev = None
    for i, u in enumerate(U):
        spec = MQuantileSpec.make(tau, u, c, delta)
        fit = None
        if warm_start and prev is not None:
            try:
                fit = fit_unconditional(Y, spec, IrlsOptions(opts.max_iter, opts.tol, prev))
            except MQRIFError:
                fit = None
        if fit is None or not fit.converged:
            try:
                fit = fit_unconditional(Y, spec, opts)
            except MQRIFError:
                fit = None
        if fit is not None:
            verts[i] = fit.theta
            flags[i] = fit.converged
            if fit.converged:
                prev = fit.theta
    return ContourSet(tau=tau, c=c, directions=U, vertices=verts, converged_flags=flags)


def _on_segment(pt, a, b, tol):
    ab = b - a
    ap = pt - a
    cross = ab[0] * ap[1] - ab[1] * ap[0]
    scale = max(np.linalg.norm(ab), 1e-300)
    if abs(cross) / scale > tol:
        return False
    t = (ap @ ab) / (scale * scale)
    return -tol <= t * scale and (t - 1.0) * scale <= tol


def point_in_polygon(pt, poly, tol: float = 1e-12) -> bool:
    """Even-odd ray test; points on an edge count as inside."""
    x, y = pt
    inside = False
    n = poly.shape[0]
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if _on_segment(np.asarray(pt, float), a, b, tol):
            return True
        if (a[1] > y) != (b[1] > y):
            xi = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if xi > x:
                inside = not inside
    return inside


def nesting_report(inner: ContourSet, outer: ContourSet, tol: float = 1e-12):
    """Check every converged inner vertex lies in the outer polygon.

    Returns ``(ok, violations)`` with the offending inner-vertex indices.
    """
    if inner.p != 2 or outer.p != 2:
        raise ValueError("nesting report is defined for bivariate contours only")
    poly = outer.vertices[outer.converged_flags]
    if poly.shape[0] < 3:
        raise MQRIFError("outer contour has fewer than 3 converged vertices")
    bad = [i for i, (v, ok) in enumerate(zip(inner.vertices, inner.converged_flags))
           if ok and not point_in_polygon(v, poly, tol)]
    return len(bad) == 0, bad

"""Multidimensional Huber score, directional weight and their Jacobian."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .exceptions import SingularResidualError

EPS_NORM = 1e-10
_CBRT_EPS = np.cbrt(np.finfo(float).eps)


@dataclass(frozen=True)
class HuberParams:
    """Tuning of the Huber score.

    ``eta_form="printed"`` evaluates the alternative lower branch
    ``-(1 - cos)**delta * zeta + 2(1 - tau)`` for comparison; the default
    ``"corrected"`` uses ``(1 + cos)`` so that the p=1 case reduces to
    ``1 - zeta * sgn(y - theta)``.
    """

    c: float
    delta: float = 1.0
    epsilon_norm: float = EPS_NORM
    eta_form: str = "corrected"

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError(f"tuning constant c must be >= 0, got {self.c}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if not self.epsilon_norm > 0:
            raise ValueError("epsilon_norm must be > 0")
        if self.eta_form not in ("corrected", "printed"):
            raise ValueError(f"unknown eta_form {self.eta_form!r}")

    @property
    def printed(self) -> bool:
        return self.eta_form == "printed"


@dataclass(frozen=True)
class MQuantileSpec:
    """Level ``tau``, direction ``u`` (stored unit-norm) and Huber tuning."""

    tau: float
    u: np.ndarray
    huber: HuberParams = field(default_factory=lambda: HuberParams(c=0.0))

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        if u.ndim != 1:
            raise ValueError("direction must be a vector")
        nrm = np.linalg.norm(u)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise ValueError("direction must be a finite nonzero vector")
        u = u / nrm
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @classmethod
    def make(cls, tau, u, c, delta=1.0, eta_form="corrected"):
        return cls(tau, u, HuberParams(c=float(c), delta=float(delta), eta_form=eta_form))

    @property
    def p(self) -> int:
        return self.u.shape[0]

    @property
    def c(self) -> float:
        return self.huber.c

    @property
    def zeta(self) -> float:
        return 1.0 - 2.0 * self.tau

    def with_c(self, c) -> MQuantileSpec:
        return replace(self, huber=replace(self.huber, c=float(c)))

    def cos_phi(self, r) -> float:
        r = np.asarray(r, dtype=float)
        nrm = np.linalg.norm(r)
        if nrm <= self.huber.epsilon_norm:
            return 0.0
        return float(np.clip(r @ self.u / nrm, -1.0, 1.0))

    def _kernel_args(self):
        h = self.huber
        return (self.u, float(self.tau), float(h.c), float(h.delta),
                float(h.epsilon_norm), h.printed)

    def __eq__(self, other):
        if not isinstance(other, MQuantileSpec):
            return NotImplemented
        return (self.tau == other.tau and self.huber == other.huber
                and np.array_equal(self.u, other.u))

    def __hash__(self):
        return hash((self.tau, self.huber, self.u.tobytes()))


def psi(r, params: HuberParams) -> np.ndarray:
    """Multidimensional Huber score: ``r/c`` inside the ball, ``r/|r|`` outside."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    nrm = np.linalg.norm(r)
    if nrm <= params.epsilon_norm:
        return np.zeros_like(r)
    if nrm < params.c:
        return r / params.c
    return r / nrm


def eta_weight(cos_phi, tau, delta=1.0, eta_form="corrected"):
    """Directional weight in ``[2 tau, 2(1 - tau)]`` (for delta=1, tau <= 1/2).

    Accepts a scalar or an array of cosines.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    arr = np.atleast_1d(np.asarray(cos_phi, dtype=float))
    out = kernels.numpy_kernels.eta_vec(arr, float(tau), float(delta), eta_form == "printed")
    if np.ndim(cos_phi) == 0:
        return float(out[0])
    return out


def score(y, theta, spec: MQuantileSpec) -> np.ndarray:
    """Estimating-equation summand ``eta(phi) * psi(y - theta)``."""
    r = np.atleast_1d(np.asarray(y, dtype=float) - np.asarray(theta, dtype=float))
    return kernels.numpy_kernels.score_matrix(r[None, :], *spec._kernel_args())[0]


def score_rows(R, spec: MQuantileSpec) -> np.ndarray:
    """Scores for every residual row of ``R`` (n x p)."""
    R = np.ascontiguousarray(R, dtype=float)
    return kernels.score_matrix(R, *spec._kernel_args())


def _analytic_jacobian(r, spec: MQuantileSpec) -> np.ndarray:
    # d/dtheta of eta(cos phi(r)) psi(r), r = y - theta.
    hp = spec.huber
    p = r.shape[0]
    nrm = np.linalg.norm(r)
    cos = float(np.clip(r @ spec.u / nrm, -1.0, 1.0))
    eta = eta_weight(cos, spec.tau, hp.delta, hp.eta_form)
    if nrm < hp.c:
        psi_r = r / hp.c
        dpsi = np.eye(p) / hp.c
    else:
        psi_r = r / nrm
        dpsi = (np.eye(p) - np.outer(r, r) / nrm**2) / nrm
    zeta = spec.zeta
    if cos > 0.0:
        deta = -hp.delta * (1.0 - cos) ** (hp.delta - 1.0) * zeta
    elif hp.printed:
        deta = hp.delta * (1.0 - cos) ** (hp.delta - 1.0) * zeta
    else:
        deta = -hp.delta * (1.0 + cos) ** (hp.delta - 1.0) * zeta
    dcos = spec.u / nrm - cos * r / nrm**2
    d_dr = eta * dpsi + deta * np.outer(psi_r, dcos)
    return -d_dr


def score_jacobian(y, theta, spec: MQuantileSpec, method: str = "central-diff", step=None):
    """Derivative of ``score(y, theta)`` with respect to ``theta`` (p x p).

    ``method="analytic"`` differentiates the Huber score and the directional
    weight in closed form; ``"central-diff"`` uses symmetric differences with
    step ``cbrt(eps) * max(1, |theta|)`` unless ``step`` is given.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    r = y - theta
    if np.linalg.norm(r) <= spec.huber.epsilon_norm:
        raise SingularResidualError("score is not differentiable at a zero residual")
    if method == "analytic":
        return _analytic_jacobian(r, spec)
    if method != "central-diff":
        raise ValueError(f"unknown method {method!r}")
    if step is None:
        step = _CBRT_EPS * max(1.0, float(np.linalg.norm(theta)))
    p = r.shape[0]
    J = np.empty((p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = step
        J[:, j] = (score(y, theta + e, spec) - score(y, theta - e, spec)) / (2.0 * step)
    return J


def default_step(theta) -> np.ndarray:
    """Per-coordinate central-difference step ``cbrt(eps) * max(1, |theta_j|)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return _CBRT_EPS * np.maximum(1.0, np.abs(theta))

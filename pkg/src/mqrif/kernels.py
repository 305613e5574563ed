"""Backend selection for the per-row numeric kernels.

Set ``MQRIF_BACKEND=numpy`` to force the pure-numpy path; the default is numba
when it imports, numpy otherwise. Both expose::

    eta_vec(cos_phi, tau, delta, printed)
    score_matrix(R, u, tau, c, delta, eps, printed)        -> (n, p)
    irls_weights(R, u, tau, c, delta, eps, printed)        -> (n,)
    jacobian_sum(R, u, tau, c, delta, eps, printed, h)     -> ((p, p), n_used)
    irls_target(Y, theta, u, tau, c, delta, eps, printed)  -> (weighted mean, weight sum)
    score_sum(Y, theta, u, tau, c, delta, eps, printed)    -> (sum, n_zero, nearest row)

``R`` holds residual rows ``y_i - theta``.
"""

import os

from . import _kernels_numpy as numpy_kernels

_requested = os.environ.get("MQRIF_BACKEND", "numba").strip().lower()

numba_kernels = None
if _requested != "numpy":
    try:
        from . import _kernels_numba as numba_kernels
    except ImportError:  # pragma: no cover - numba missing
        numba_kernels = None

if numba_kernels is not None:
    BACKEND = "numba"
    _impl = numba_kernels
else:
    BACKEND = "numpy"
    _impl = numpy_kernels

eta_vec = _impl.eta_vec
score_matrix = _impl.score_matrix
irls_weights = _impl.irls_weights
jacobian_sum = _impl.jacobian_sum
irls_target = _impl.irls_target
score_sum = _impl.score_sum

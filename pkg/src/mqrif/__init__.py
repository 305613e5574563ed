"""Multivariate M-quantiles, their recentered influence functions and
unconditional partial effects."""

__version__ = "0.1.0"

from .contours import ContourSet, contour, direction_grid, nesting_report, point_in_polygon
from .exceptions import (ConvergenceError, DataError, DegenerateDataError, MQRIFError,
                         RankDeficiencyError, SingularMatrixError, SingularResidualError)
from .huber import HuberParams, MQuantileSpec, eta_weight, psi, score, score_jacobian
from .regression import (BootstrapResult, SplineConfig, UpeFit, asymptotic_covariance,
                         bootstrap_ci, joint_direction_covariance, linearity_test,
                         umqpe_linear, umqpe_splines, upe_binary)
from .rif import RifMatrices, d_matrix, influence, m_matrix, rif_covariance
from .solver import (ConditionalFit, IrlsOptions, MQuantileFit, equation_norm,
                     fit_conditional_linear, fit_unconditional)
from .tuning import CvResult, c_grid, cross_validate

__all__ = [
    "BootstrapResult", "ConditionalFit", "ContourSet", "ConvergenceError", "CvResult",
    "DataError", "DegenerateDataError", "HuberParams", "IrlsOptions", "MQRIFError",
    "MQuantileFit", "MQuantileSpec", "RankDeficiencyError", "RifMatrices",
    "SingularMatrixError", "SingularResidualError", "SplineConfig", "UpeFit",
    "asymptotic_covariance", "bootstrap_ci", "c_grid", "contour", "cross_validate",
    "d_matrix", "direction_grid", "equation_norm", "eta_weight", "fit_conditional_linear",
    "fit_unconditional", "influence", "joint_direction_covariance", "linearity_test",
    "m_matrix", "nesting_report", "point_in_polygon", "psi", "rif_covariance", "score",
    "score_jacobian", "umqpe_linear", "umqpe_splines", "upe_binary",
]

import numpy as np


class MQRIFError(Exception):
    """Base class for errors raised by mqrif."""


class DegenerateDataError(MQRIFError, ValueError):
    pass


class SingularResidualError(MQRIFError, ValueError):
    """Residual too close to zero for a derivative of the score."""


class SingularMatrixError(MQRIFError, np.linalg.LinAlgError):
    """A matrix that must be inverted is singular or badly conditioned."""


class RankDeficiencyError(SingularMatrixError):
    pass


class ConvergenceError(MQRIFError, RuntimeError):
    pass


class DataError(MQRIFError, ValueError):
    """Bad input data: missing columns, unparsable values, invalid transforms."""

"""Exception hierarchy for the closure toolkit.

Every error carries an ``exit_code`` so the management command can map it to
the process status without inspecting the type.
"""


class PhiClosureError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1

    def __init__(self, message, details=None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigurationError(PhiClosureError):
    """Invalid run configuration or parameter combination"""
    exit_code = 2


class DomainError(PhiClosureError, ValueError):
    """A function was called outside its mathematical domain"""
    exit_code = 2


class NumericalError(PhiClosureError):
    """Base class for numerical failures"""
    exit_code = 3


class SpecialFunctionOverflow(NumericalError, OverflowError):
    """exp() overflow inside a closed-form special function"""


class CertificationError(NumericalError):
    """A renormalization map failed its monotonicity grid check"""


class NoConvergenceError(NumericalError):
    """No Newton start converged; ``best`` holds the best iterate seen"""

    def __init__(self, message, best=None, details=None):
        super().__init__(message, details)
        self.best = best


class SingularJacobianError(NumericalError):
    """Jacobian could not be factorized even after a Tikhonov shift"""


class MomentRangeError(NumericalError):
    """The isotropic moment lies outside the range of the map"""


class QuadratureFileError(PhiClosureError):
    """A quadrature table could not be read or parsed"""
    exit_code = 4


class OutputError(PhiClosureError):
    """Result files could not be written"""
    exit_code = 4

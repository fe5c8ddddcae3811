"""Exception hierarchy shared by the solver modules."""


class QWZError(Exception):
    """Base class for all package errors."""


class ValidationError(QWZError, ValueError):
    """Invalid lattice, bath, impurity or run configuration."""


class ConfigurationError(ValidationError):
    """Physically inadmissible setup (e.g. both baths on a single column)."""


class DivergenceError(QWZError, ArithmeticError):
    """Bose occupation evaluated at or below the chemical potential."""


class SingularityError(QWZError, ArithmeticError):
    """Resolvent or curvature evaluated at a singular point."""


class NumericalError(QWZError, ArithmeticError):
    """Eigendecomposition or other linear-algebra failure."""


class IntegrationError(QWZError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, error_estimate=None, n_panels=None):
        super().__init__(message)
        self.error_estimate = error_estimate
        self.n_panels = n_panels


class ConvergenceError(QWZError, ArithmeticError):
    """Chern sum too far from an integer (gap closing suspected)."""

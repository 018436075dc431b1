"""Exception hierarchy for hornlab."""


class HornlabError(Exception):
    """Base class for all package errors."""


class DomainError(HornlabError, ValueError):
    """An argument lies outside the domain of a formula."""


class ConfigError(HornlabError, ValueError):
    """Inconsistent or invalid parameters."""


class CertificationError(HornlabError):
    """A numerical certificate failed.

    The offending report (if any) is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConvergenceError(HornlabError):
    """An iterative solve did not converge within its budget."""


class StiffnessError(ConvergenceError):
    """Step-size control of the radial integrator underflowed."""


class AsymptoticMismatchError(HornlabError):
    """A radial solution left the asymptotic branch it was launched on."""


class ComplexRootsError(DomainError):
    """The indicial equation has no real roots."""


class QuadratureError(ConvergenceError):
    """Quadrature refinement did not converge."""


class FitError(HornlabError):
    """Least-squares model fit is rank deficient."""


class DegenerateNormalization(HornlabError, ZeroDivisionError):
    """Normalizing a field that vanishes identically."""

"""Exception hierarchy shared by all modules."""


class FPConvexError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FPConvexError, ValueError):
    """An argument lies outside the domain of a function (e.g. a nonpositive density)."""


class DegenerateMeanError(FPConvexError, ArithmeticError):
    """The difference quotient defining a mean has a vanishing denominator off the diagonal."""


class ConfigurationError(FPConvexError, ValueError):
    """Invalid construction parameters or run configuration."""


class AssemblyError(FPConvexError):
    """An assembled operator violates one of its structural invariants."""


class ScopeError(FPConvexError):
    """An operation was requested outside the setting in which its statement holds."""


class IntegrationError(FPConvexError):
    """Time stepping failed; carries the last accepted state."""

    def __init__(self, message, t=None, y=None):
        super().__init__(message)
        self.t = t
        self.y = y


class GeodesicError(FPConvexError):
    """Neither shooting nor action minimization produced a geodesic within tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})

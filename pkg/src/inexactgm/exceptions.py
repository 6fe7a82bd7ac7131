"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Vectors of incompatible length were combined."""


class DomainError(ValueError):
    """A point lies outside the domain an operation is defined on."""


class CapabilityError(NotImplementedError):
    """The requested combination of set, prox-function and regularizer is
    not supported in closed form."""


class OracleError(RuntimeError):
    """An oracle could not honor the requested accuracy.

    ``achieved`` carries the best accuracy reached before giving up.
    """

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved

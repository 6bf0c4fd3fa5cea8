"""Exception hierarchy."""


class PropspeedError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PropspeedError, ValueError):
    """A function was evaluated outside the set where it is defined."""


class OracleLimitError(PropspeedError):
    """The dense oracle was asked for a box above the configured site cap."""

    def __init__(self, n_sites, limit):
        self.n_sites = n_sites
        self.limit = limit
        super().__init__(
            f"box has {n_sites} sites, dense oracle limit is {limit} "
            "(override with PROPSPEED_ORACLE_LIMIT)"
        )


class EnclosureError(PropspeedError):
    """The interval used for scaling does not contain the spectrum."""


class AccuracyError(PropspeedError):
    """Quadrature failed to reach the requested accuracy.

    The best available estimate is kept on ``estimate``.
    """

    def __init__(self, message, estimate=None, error=None):
        self.estimate = estimate
        self.error = error
        super().__init__(message)


class ResourceError(PropspeedError):
    """Exact arithmetic grew past the configured size limits."""


class DegenerateFitError(PropspeedError, ValueError):
    """A decay fit has too few usable data points."""

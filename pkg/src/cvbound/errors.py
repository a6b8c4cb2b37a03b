"""Exception types shared across the package."""


class CVBoundError(Exception):
    """Base class for all errors raised by cvbound."""


class InvalidArgument(CVBoundError, ValueError):
    """An argument violates a documented precondition."""


class InvalidState(CVBoundError, ValueError):
    """A covariance matrix is unphysical or otherwise unusable for the request."""


class UnphysicalSource(InvalidArgument):
    """A single-mode source violates v_min * v_max >= 1."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class Indeterminate(CVBoundError):
    """A feasibility solve did not converge, so no verdict can be given.

    ``interval`` holds the ambiguous range of the scale parameter when the
    failure happened inside a bisection, ``margin`` the best value of the
    maximized minimum eigenvalue reached before giving up.
    """

    def __init__(self, message, interval=None, margin=None):
        super().__init__(message)
        self.interval = interval
        self.margin = margin


class SearchExhausted(CVBoundError):
    """No bound entangled seed state was found within the draw budget."""

    def __init__(self, message, draws):
        super().__init__(message)
        self.draws = draws


class UnidentifiableModel(CVBoundError, ValueError):
    """The measurement settings do not determine every covariance entry."""

    def __init__(self, message, entries):
        super().__init__(message)
        self.entries = entries

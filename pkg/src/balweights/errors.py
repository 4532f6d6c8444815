"""Exception hierarchy.

Every error carries a stable ``code`` string so that callers (and the CLI)
can dispatch on the failure kind without parsing messages.
"""


class BalweightsError(Exception):
    """Base class for all package errors."""

    code = "ERROR"

    def __init__(self, message: str, code: str | None = None) -> None:
        super().__init__(message)
        if code is not None:
            self.code = code


class DataError(BalweightsError):
    """Invalid input data (bad treatment coding, non-finite values, ...)."""

    code = "DATA_ERROR"


class EstimationError(BalweightsError):
    """A weighting or estimation step could not produce a usable result."""

    code = "ESTIMATION_ERROR"


class SeparationError(EstimationError):
    """Logistic coefficients diverged during fitting.

    ``coefficients`` holds the iterate at which divergence was declared.
    """

    code = "SEPARATION_DETECTED"

    def __init__(self, message: str, coefficients=None) -> None:
        super().__init__(message)
        self.coefficients = coefficients


class RankDeficientError(EstimationError):
    """The logistic design matrix does not have full column rank."""

    code = "RANK_DEFICIENT"

"""Exception types raised across the package."""


class SpcrError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SpcrError, ValueError):
    pass


class RankDeficient(SpcrError, ValueError):
    """A matrix lacks the column rank an operation needs."""


class NotPositiveDefinite(SpcrError, ValueError):
    pass


class FoldTooSmall(SpcrError, ValueError):
    pass


class UndefinedRate(SpcrError, ValueError):
    """A TPR/TNR denominator set is empty."""


class ParseError(SpcrError, ValueError):
    """Malformed CSV or model file.

    Carries the 1-based data ``row`` and the ``column`` name when known.
    """

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ZeroCovariance(UserWarning):
    """PLS stopped early: the deflated covariates carry no covariance with y."""


class DegenerateColumnWarning(UserWarning):
    """A constant covariate column was left unscaled."""


class SingleReplicateWarning(UserWarning):
    pass

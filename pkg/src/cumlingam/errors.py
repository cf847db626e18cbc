"""Exception hierarchy shared by all modules."""


class CumLingamError(Exception):
    """Base class for every error raised by the package."""


class InputShapeError(CumLingamError, ValueError):
    """Mismatched lengths, empty columns, too few variables."""


class SampleSizeError(CumLingamError, ValueError):
    """Not enough samples for the requested statistic."""


class UnsupportedOrderError(CumLingamError, ValueError):
    """Cumulant order outside the supported range."""


class DegenerateCumulantError(CumLingamError):
    """A cumulant needed in a denominator is indistinguishable from zero."""


class NonEstimableError(CumLingamError):
    """The closed-form estimate has no real solution.

    ``clamped`` is True when the square-root argument was negative but within
    two standard errors of zero, False when it was clearly negative.
    """

    def __init__(self, msg: str, clamped: bool = False):
        super().__init__(msg)
        self.clamped = clamped


class NoNullSpaceError(CumLingamError):
    """No nonzero weight vector annihilates the requested columns."""


class ConstraintError(CumLingamError, ValueError):
    """Random model constraints cannot be satisfied."""


class LabelMismatchError(CumLingamError, ValueError):
    """Two graphs or datasets disagree on their observed labels."""


class CoefficientRecoveryError(CumLingamError):
    """The noise block of the mixing matrix is singular."""

"""Exception hierarchy.

``DataError`` subclasses describe bad inputs (CLI exit code 2);
``NumericalError`` subclasses describe integration or algebraic failures
(CLI exit code 3).
"""


class DMPFlightError(Exception):
    """Base class for every error raised by this package."""


class DataError(DMPFlightError, ValueError):
    pass


class NumericalError(DMPFlightError, ArithmeticError):
    pass


class GoalZeroError(DataError):
    """Discrete phase normalization is undefined when the goal equals the start.

    With the default start at zero this is the case ``g == 0``.
    """


class BasisMismatchError(DataError):
    pass


class TooFewSamplesError(DataError):
    pass


class BoundaryPeakError(DataError):
    """The maximum of the segmentation DOF lies on an end sample."""


class ParseError(DataError):
    pass


class StepSizeError(NumericalError):
    """Integration step violates ``dt <= tau / 10``."""


class DegenerateNormalizerError(NumericalError):
    """Sum of basis activations fell below the normalizer floor."""


class SingularMetricError(NumericalError):
    pass


class NotHurwitzError(NumericalError):
    pass


class NonFiniteError(NumericalError):
    pass


class RollGuardError(NumericalError):
    """Roll angle too close to +-pi/2 for the collective-thrust inversion."""


class DivergenceError(NumericalError):
    pass

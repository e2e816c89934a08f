"""Exception hierarchy shared by all devfill modules."""


class DevfillError(Exception):
    """Base class for every error raised by devfill."""


class SimplicityViolation(DevfillError):
    pass


class InsufficientData(DevfillError):
    pass


class CornerAmbiguity(DevfillError):
    pass


class CurvatureDegenerate(DevfillError):
    pass


class NonGenericIncidence(DevfillError):
    pass


class NotCriticalZero(DevfillError):
    pass


class NotAZero(DevfillError):
    pass


class DegenerateField(DevfillError):
    pass


class IncidenceDegenerate(DevfillError):
    pass


class MetricDegenerate(DevfillError):
    pass


class FoldOver(DevfillError):
    pass


class GenericityFailure(DevfillError):
    """Raised when an operation requires a curve that passes the genericity report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SearchBudgetExceeded(DevfillError):
    """Covering search ran out of node budget; ``partial`` holds what was found."""

    def __init__(self, message, partial=()):
        super().__init__(message)
        self.partial = list(partial)


class NormalFieldDegenerate(DevfillError):
    pass


class CaseConstructionFailed(DevfillError):
    pass


class ContinuationObstructed(DevfillError):
    """Continuation hit a degenerate configuration.

    ``parameter`` is the offending (s, s~) pair when one is known, ``step`` the
    index of the boundary in a multi-step run.
    """

    def __init__(self, message, parameter=None, step=None):
        super().__init__(message)
        self.parameter = parameter
        self.step = step


class CurveFormatError(DevfillError):
    """Malformed curve file; message names the line or field at fault."""


class ConfigError(DevfillError):
    """Invalid run configuration."""

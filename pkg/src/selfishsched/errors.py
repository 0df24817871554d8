"""Exception types raised by the toolkit."""


class SelfishSchedError(Exception):
    """Base class for every error raised by this package."""


class MalformedInstance(SelfishSchedError, ValueError):
    """Instance description has the wrong structure (keys, lengths, types)."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class NonPositiveParameter(MalformedInstance):
    """A size or capacity is zero, negative, NaN or infinite."""


class ShapeMismatch(SelfishSchedError, ValueError):
    pass


class PartitionNotFound(SelfishSchedError, ArithmeticError):
    """No (or more than one) saturation index satisfies the partition test."""


class InfeasibleRates(SelfishSchedError, ValueError):
    """Rates need more than the worker capacity."""


class NumericalBreakdown(SelfishSchedError, ArithmeticError):
    pass


class DegenerateInstance(SelfishSchedError, ValueError):
    pass


class ZeroBaseline(SelfishSchedError, ZeroDivisionError):
    pass


class SubsystemViolation(SelfishSchedError, AssertionError):
    """The equivalent-subsystem construction broke one of its guarantees."""


class NotAnAugmentation(SelfishSchedError, ValueError):
    pass


class EmptyWindow(SelfishSchedError, ValueError):
    """A simulation trace has no measurement window to estimate from."""

"""Exception hierarchy shared by all geosink modules."""


class GeosinkError(Exception):
    """Base class for library errors."""


class ValidationError(GeosinkError, ValueError):
    """Invalid input shape, range or configuration."""


class NumericalError(GeosinkError, ArithmeticError):
    """A numerical routine could not produce a valid result."""


class DimensionMismatch(ValidationError):
    pass


class DuplicatePoints(ValidationError):
    pass


class NegativeWeight(ValidationError):
    pass


class NonPositiveTime(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class SizeMismatch(ValidationError):
    pass


class DegenerateInput(ValidationError):
    pass


class DegeneratePlan(ValidationError):
    pass


class SolveFailure(NumericalError):
    pass


class KernelNotPositive(NumericalError):
    pass


class Disconnected(NumericalError):
    pass


class NumericalUnderflow(NumericalError):
    pass


class FormatError(GeosinkError, OSError):
    """A file could be opened but its contents do not parse."""

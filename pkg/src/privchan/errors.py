"""Exception hierarchy shared by all modules."""


class PrivChanError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PrivChanError, ValueError):
    """Input failed a structural or numerical check."""


class NonStochasticError(ValidationError):
    """A distribution or channel column is negative or does not sum to one."""


class DimensionError(ValidationError):
    """Array shapes do not agree."""


class DomainError(ValidationError):
    """A parameter lies outside the range where the operation is defined."""


class GridError(ValidationError):
    """A discretization grid leaves too much probability mass outside."""


class SchemaError(ValidationError):
    """A serialized file does not match the documented schema.

    ``pointer`` is a JSON pointer to the offending field.
    """

    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class ConvergenceError(PrivChanError):
    """An iterative solver hit its iteration limit before reaching tolerance.

    The best result found so far is kept in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class EnumerationTooLargeError(PrivChanError):
    """The number of selection maps to enumerate exceeds the configured cap."""

    def __init__(self, count, cap):
        super().__init__(f"enumeration of {count} selections exceeds cap {cap}")
        self.count = count
        self.cap = cap

class DiffIdealError(Exception):
    """Base class for errors raised by diffideal."""


class UsageError(DiffIdealError, ValueError):
    """An operation was called outside its domain (mixed algebras, degree of 0, ...)."""


class ValidationError(DiffIdealError, ValueError):
    """A structural invariant of an input object does not hold."""


class ResourceError(DiffIdealError, RuntimeError):
    """A configured budget or search-space cap would be exceeded."""

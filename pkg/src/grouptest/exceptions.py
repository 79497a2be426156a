"""Exception hierarchy.

Domain errors subclass ValueError so callers can catch them generically.
"""


class GroupTestingError(ValueError):
    """Base class for invalid arguments to group-testing routines."""


class CodeFormatError(GroupTestingError):
    """Raised when a code file cannot be parsed."""


class DegeneratePriorError(GroupTestingError):
    """Raised when a prior puts no mass on one of the two hypotheses."""


class EnumerationCapError(GroupTestingError):
    """Raised when exact enumeration would exceed the configured size cap."""

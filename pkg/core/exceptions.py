"""Custom exception hierarchy for the OPERA toolkit.

All toolkit-specific exceptions inherit from ``OperaToolkitError`` so that callers
can catch the entire hierarchy with a single ``except OperaToolkitError`` clause
while still being able to handle individual categories more specifically.

The hierarchy is flat (one level deep). ``ValidationError`` additionally derives
from ``ValueError`` so numeric call sites that already guard against
``ValueError`` keep working.
"""


class OperaToolkitError(Exception):
    """Base exception for all OPERA toolkit errors."""

    pass


class ConfigurationError(OperaToolkitError):
    """Raised when configuration is invalid, incomplete or unsupported."""

    pass


class ValidationError(OperaToolkitError, ValueError):
    """Raised when an input violates an operation's precondition."""

    pass


class StateError(OperaToolkitError):
    """Raised when a learner state is advanced out of order."""

    pass


class DegenerateModelError(OperaToolkitError):
    """Raised when a spectral model has no non-null eigendirection."""

    pass


class OutputError(OperaToolkitError):
    """Raised when result files cannot be written or read back."""

    pass

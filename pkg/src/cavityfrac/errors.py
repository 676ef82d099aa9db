"""Exception hierarchy shared across the package."""


class CavityFracError(Exception):
    """Base class for all package errors."""


class ValidationError(CavityFracError, ValueError):
    """Invariant or precondition violated."""


class TouchstoneParseError(CavityFracError, ValueError):
    """Malformed Touchstone file content."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ShapeError(CavityFracError, ValueError):
    """Array shape inconsistent with the expected network/tensor layout."""


class SingularMatrixError(CavityFracError, ValueError):
    """Two-port conversion impossible (singular S or T matrix)."""


class ConditioningError(CavityFracError, ValueError):
    """Fixture matrices too ill-conditioned for reliable de-embedding."""


class NumericError(CavityFracError, ValueError):
    """Non-finite values or failed numeric solve."""


class ConfigError(CavityFracError, ValueError):
    """Bad run configuration (unknown key, missing file, invalid value)."""

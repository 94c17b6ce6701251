"""Exception and warning types shared across the package.

The three error families map one-to-one onto the CLI exit codes:
configuration problems (2), data problems (3) and numerical failures (4).
"""


class RobustDEError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    category = "error"


class ConfigError(RobustDEError, ValueError):
    exit_code = 2
    category = "config"


class DataError(RobustDEError, ValueError):
    exit_code = 3
    category = "data"


class NumericError(RobustDEError, ArithmeticError):
    exit_code = 4
    category = "numeric"


class SingularDesignError(NumericError):
    """Design matrix is rank deficient; ``term`` names the collinear column."""

    def __init__(self, message, term=None):
        super().__init__(message)
        self.term = term


class DegenerateTargetError(DataError):
    """A binary regression target has only one class."""


class DegenerateFoldError(DataError):
    """A cross-fitting training complement lacks one exposure level."""


class SeparationWarning(UserWarning):
    """Logistic fit diverged, most likely from (quasi-)complete separation."""


class LonelyPSUWarning(UserWarning):
    """A stratum has a single PSU and contributes nothing to the variance."""

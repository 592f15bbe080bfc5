"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value or precondition on setup data is invalid."""


class InputError(ValueError):
    """Runtime input data is malformed (wrong length, out of range, ...)."""


class InternalError(RuntimeError):
    """An internal consistency check failed; indicates a bug upstream."""


class EstimationError(RuntimeError):
    """An estimator received degenerate data and cannot produce a value."""


class BlowupError(ArithmeticError):
    """The split-step solution produced non-finite samples."""

"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A value or combination of values violates a documented invariant."""


class DimensionError(ValueError):
    """Array arguments have incompatible lengths or shapes."""


class DomainError(ValueError):
    """An operation is undefined for the given (otherwise well-formed) input."""


class ConfigurationError(ValueError):
    """A configuration is internally inconsistent (e.g. delay-domain aliasing)."""


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss) or was otherwise unable to proceed."""


class StageError(RuntimeError):
    """A pipeline stage failed or its prerequisites are missing."""

"""Exception types shared across the package."""


class GuidedmhError(Exception):
    """Base class for all package-specific errors."""


class DegenerateStatisticError(GuidedmhError):
    """A direction statistic evaluated to a degenerate value (e.g. zero quadratic form).

    Raised instead of silently returning 0 so callers can decide whether to
    perturb, reject, or abort.
    """


class GuidedLoopError(GuidedmhError):
    """The guided proposal loop exceeded its retry budget."""


class ChainAbortedError(GuidedmhError):
    """A chain died mid-run; ``partial`` holds the trace up to the failed step."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(GuidedmhError):
    """An experiment config failed validation."""

"""Exception hierarchy shared by all modules."""


class SnowError(Exception):
    """Base class; ``code`` is the machine-readable error tag used by the CLI."""

    code = "error"


class DomainError(SnowError, ValueError):
    code = "domain_error"


class GridError(SnowError, ValueError):
    code = "grid_error"


class ModelError(SnowError, ValueError):
    code = "invalid_model"


class UnboundedError(SnowError, ValueError):
    """The requested bound is infinite (snowflake parameter equal to 1)."""

    code = "unbounded"


class ResourceError(SnowError, RuntimeError):
    code = "resource_error"


class ToleranceError(SnowError, RuntimeError):
    code = "tolerance_error"


class SplitError(SnowError, RuntimeError):
    code = "split_error"

    def __init__(self, message: str, best_phi: float):
        super().__init__(message)
        self.best_phi = best_phi


class BuildError(SnowError, RuntimeError):
    code = "build_error"


class InsufficientDepthError(SnowError, RuntimeError):
    code = "insufficient_depth"

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class ParameterMismatchError(SnowError, ValueError):
    code = "parameter_mismatch"


class CorrespondenceError(SnowError, ValueError):
    code = "correspondence_error"

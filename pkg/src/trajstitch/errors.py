"""Exception types shared across the package."""


class TrajstitchError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TrajstitchError):
    """Invalid configuration: bad parameter arity, unknown names, bad ranges."""


class ContractViolationError(TrajstitchError):
    """A caller broke an interface contract (e.g. invalid action index)."""


class NumericError(TrajstitchError):
    """A simulator produced a non-finite value; carries the offending inputs."""


class EstimationError(TrajstitchError):
    """An estimator was given inputs it cannot work with (e.g. empty set)."""


class ExhaustionError(TrajstitchError):
    """No feasible, non-excluded candidate remains at some stitching step."""

    def __init__(self, message: str, time_step: int, trajectories_completed: int = 0):
        super().__init__(message)
        self.time_step = time_step
        self.trajectories_completed = trajectories_completed


class DatabaseFormatError(TrajstitchError):
    """A persisted database failed to load.

    ``code`` is machine-readable: ``version_mismatch``, ``checksum_mismatch``,
    ``malformed_row``, ``empty_database`` or ``missing_file``.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class DatabaseIntegrityError(TrajstitchError):
    """Loaded data violates a database invariant (names the offending set)."""

    def __init__(self, message: str, set_id: int | None = None):
        super().__init__(message)
        self.set_id = set_id

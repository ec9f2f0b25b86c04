"""Exception taxonomy shared across the toolkit.

The CLI maps these onto process exit codes (config errors 2, data errors 3,
training errors 4); the HTTP service maps them onto status codes.
"""


class EigenloopError(Exception):
    """Base class for all toolkit errors."""


class FormatError(EigenloopError):
    """A file container is malformed (bad magic, version, or framing)."""


class DataError(EigenloopError):
    """Payload values violate a contract (non-finite, empty, out of range)."""


class ShapeError(EigenloopError):
    """Operands have incompatible dimensions."""


class DegenerateInputError(EigenloopError):
    """Input is degenerate for the requested operation (e.g. a zero vector)."""


class ConfigError(EigenloopError):
    """Invalid experiment configuration; the message carries the field path."""


class TrainingError(EigenloopError):
    """Optimization diverged or produced non-finite values."""


class ContractError(EigenloopError):
    """An operation was invoked outside its valid state or preconditions."""

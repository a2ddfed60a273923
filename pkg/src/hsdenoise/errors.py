"""Exception types shared across the package.

The CLI maps these onto exit codes (2 = bad arguments, 3 = data/format
problems, 4 = computation failures), so library code should raise the most
specific class that applies rather than bare ValueError.
"""


class HsdenoiseError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(HsdenoiseError):
    """A file on disk does not conform to its declared binary format."""


class ShapeError(HsdenoiseError):
    """Array dimensions are inconsistent with what an operation requires."""


class PreconditionError(HsdenoiseError):
    """An argument violates a documented precondition (bad range, empty mask...)."""


class DegenerateInputError(HsdenoiseError):
    """Input is technically well-formed but carries no usable signal."""


class NumericError(HsdenoiseError):
    """A computation produced non-finite values and was aborted."""


class RepairError(HsdenoiseError):
    """A flagged pixel could not be repaired from its neighborhood."""


class GenerationError(HsdenoiseError):
    """Synthetic data generation could not satisfy its constraints."""


class StateError(HsdenoiseError):
    """An operation was called without required cached state."""


class ConfigError(HsdenoiseError):
    """A run-configuration document is malformed or out of range."""

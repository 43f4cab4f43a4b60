"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so new error types should
subclass the closest existing category rather than the base class.
"""


class SkybeamError(Exception):
    """Base class for all package errors."""


class ConfigError(SkybeamError):
    """Invalid or inconsistent run configuration (exit code 2)."""


class DataError(SkybeamError):
    """Unreadable or schema-violating input data (exit code 3)."""


class SolverCapError(SkybeamError):
    """Exact solver refused: size cap exceeded (exit code 4)."""


class SolutionInvalidError(SkybeamError):
    """A solution failed feasibility validation; message names the violated constraint."""


class CacheMismatchError(SkybeamError):
    """A coverage cache file does not match the expected parameter hash."""

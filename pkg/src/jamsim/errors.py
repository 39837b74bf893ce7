"""Exception types shared across the simulator."""


class JamsimError(Exception):
    """Base class for simulator errors. ``category`` becomes the CLI exit code."""

    category = 1


class ConfigurationError(JamsimError, ValueError):
    category = 2


class DegenerateGeometryError(JamsimError, ValueError):
    category = 3


class InsufficientDataError(JamsimError, ValueError):
    category = 4


class OutputError(JamsimError, OSError):
    category = 5

"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SurrogateError(Exception):
    exit_code = 1


class ConfigError(SurrogateError):
    exit_code = 2


class DataError(SurrogateError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class InfeasibleError(SurrogateError):
    """A constraint cannot be satisfied (e.g. no usable weight distribution)."""

    exit_code = 4

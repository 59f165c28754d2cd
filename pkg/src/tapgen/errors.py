"""Package exceptions, mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid configuration (exit code 2)."""


class DataError(ValueError):
    """Missing or malformed data artifacts (exit code 3)."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss (exit code 4)."""

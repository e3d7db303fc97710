"""Exception types shared across the package."""


class LayerwaveError(Exception):
    """Base class for all package errors."""


class ConfigError(LayerwaveError, ValueError):
    """Invalid parameter or configuration value.

    ``key`` names the offending field so the CLI can report it.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class DomainError(LayerwaveError, ValueError):
    """Argument outside the region where an operation is defined."""


class NumericalError(LayerwaveError, ArithmeticError):
    """A solve or quadrature failed its own accuracy check."""

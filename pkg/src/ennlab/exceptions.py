"""Exception types raised across the package."""


class DomainError(ValueError):
    """A bound or formula was evaluated outside the region where it is defined."""


class NumericalFailure(RuntimeError):
    """Training produced a non-finite risk."""


class ConfigError(ValueError):
    """An experiment or CLI configuration is invalid."""

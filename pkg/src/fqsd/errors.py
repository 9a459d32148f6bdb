"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid user-supplied parameters or configuration."""


class NumericalError(RuntimeError):
    """Non-finite values or an unrecoverable divergence during integration."""

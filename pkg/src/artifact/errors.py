"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or input description. CLI exit code 1."""


class NumericalError(RuntimeError):
    """Numerical failure such as an under-resolved lattice. CLI exit code 2."""


class CheckFailure(RuntimeError):
    """A verification check ran and failed. CLI exit code 3."""

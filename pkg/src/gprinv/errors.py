"""Exception types that the CLI maps onto exit codes."""


class ConfigError(ValueError):
    """Invalid configuration, file format, or command-line input (exit 2)."""


class InstabilityError(RuntimeError):
    """Numerical failure in the forward solver (exit 3)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step

"""Shared exception types, mapped to CLI exit codes by the entry point."""


class PulsefrontError(Exception):
    """Base class for package errors."""


class ConfigError(PulsefrontError):
    """Invalid run configuration.

    Carries the full list of violations, not just the first one.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalError(PulsefrontError):
    """A solver failed: non-convergence, instability, or a missing bracket."""

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        super().__init__(message)

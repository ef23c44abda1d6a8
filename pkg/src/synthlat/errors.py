"""Exception hierarchy shared by the simulator and the CLI."""


class SynthLatError(Exception):
    """Base class for all package errors."""


class DomainError(SynthLatError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ConfigError(SynthLatError, ValueError):
    """Invalid or inconsistent configuration."""


class NumericalError(SynthLatError, ArithmeticError):
    """A numerical routine could not reach the requested accuracy."""


class ProtocolError(SynthLatError):
    """An experiment step failed its own success criterion."""


class FitError(NumericalError):
    """Curve fit did not converge or had insufficient support."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EstimationError(NumericalError):
    """No significant periodic component could be identified."""

"""Shared exception types for the laboratory."""


class ContractViolation(ValueError):
    """An operation was called with inputs that break its stated preconditions."""


class NumericalFailure(RuntimeError):
    """A computation could not be completed reliably (non-contraction, blow-up, ...)."""


class UnsupportedOperation(RuntimeError):
    """The requested quantity needs data the input object does not carry."""


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration."""

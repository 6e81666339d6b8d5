"""Multilayer community detection and temporal ERGM analysis of conflict onset."""

__version__ = "0.1.0"


class DataError(ValueError):
    """Input data failed validation (exit code 2 in the CLI)."""


class NumericalError(RuntimeError):
    """A numerical routine failed (exit code 3 in the CLI)."""

"""Shared exception types."""


class CostGuardError(RuntimeError):
    """A requested computation exceeds its declared resource budget."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """Raised for configurations pydantic validation cannot see on its own."""

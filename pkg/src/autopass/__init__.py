"""Deterministic site-specific password generation with an encrypted vault."""

__version__ = "0.1.0"

"""Narrative style as sequences of linguistic choices."""

__version__ = "0.1.0"

"""Complexity-tiered LLM routing gateway."""

__version__ = "0.1.0"

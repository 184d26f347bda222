"""Core package for shared models and utilities."""

__version__ = "0.1.0"

"""Personalized music-emotion annotation loop with a source-type bias audit."""

__version__ = "0.1.0"

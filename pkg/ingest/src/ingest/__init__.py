"""Corpus acquisition and embedding pipeline feeding the axiobench engine."""

from axiobench import InputError

__all__ = ["InputError"]
__version__ = "0.1.0"

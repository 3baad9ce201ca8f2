"""Axiomatic benchmark engine for scientific-novelty metrics."""

from axiobench.util import InputError

__all__ = ["InputError"]
__version__ = "0.1.0"

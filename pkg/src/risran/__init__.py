"""Deterministic system-level simulator of a RIS-assisted open RAN."""

from .core import SchedulingPolicy, Slice

__version__ = "0.1.0"

__all__ = ["SchedulingPolicy", "Slice", "__version__"]

"""Probabilistic low-cycle-fatigue reliability toolkit."""

__version__ = "0.1.0"

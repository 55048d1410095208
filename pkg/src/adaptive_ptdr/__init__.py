"""Adaptive sample-size selection for Monte Carlo travel-time distribution estimation."""

__version__ = "0.1.0"

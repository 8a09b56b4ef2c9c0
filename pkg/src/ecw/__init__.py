"""Electricity-computation-water (ECW) coordination toolkit."""

__version__ = "0.1.0"

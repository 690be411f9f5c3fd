"""Sparse partial-correlation networks and RMT-filtered communities of stock returns."""

__version__ = "0.1.0"

"""Numerical laboratory for Ginzburg-Landau vortex pinning dynamics."""

__version__ = "0.1.0"

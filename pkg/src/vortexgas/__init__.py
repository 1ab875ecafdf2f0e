"""Numerical toolkit for the two-dimensional neutral point-vortex gas on the torus."""

__version__ = "0.1.0"

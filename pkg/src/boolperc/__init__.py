"""Poisson-Boolean continuum percolation with heavy-tailed convex grains."""

__version__ = "0.1.0"

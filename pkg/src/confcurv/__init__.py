"""Numerical laboratory for conformally invariant curvature energies of
four-dimensional immersed manifolds."""

__version__ = "0.1.0"

"""Numerical laboratory for scalar-curvature rigidity of convex polytope-type domains."""

__version__ = "0.1.0"

"""Numerical laboratory for first Dirichlet eigenpairs of convex domains."""
__version__ = "0.1.0"

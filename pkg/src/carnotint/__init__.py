"""Exact tools for polynomial first integrals of sub-Riemannian geodesic flows on Carnot groups."""

__version__ = "0.1.0"

"""Smooth injective reparametrizations of simplicial complexes and C1
approximation of piecewise affine homeomorphisms."""

__version__ = "0.1.0"

"""Symbolic-numeric verification of non-point symmetry reductions of PDEs."""

__version__ = "0.1.0"

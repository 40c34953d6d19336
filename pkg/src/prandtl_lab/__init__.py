"""Numerical laboratory for the regularized Prandtl boundary-layer system in vorticity form."""

__version__ = "0.1.0"

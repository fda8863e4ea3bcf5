"""Isospectral deformations of the radial Hydrogen-like problem."""

__version__ = '1.0.0'

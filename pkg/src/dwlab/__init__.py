"""Numerical laboratory for Denjoy-Wolff iteration of self-maps of the disk and half-plane."""

__version__ = "0.1.0"

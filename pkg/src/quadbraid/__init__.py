"""Quadratic exchange algebras, double-row transfer matrices and their spin chains."""

__version__ = "0.1.0"

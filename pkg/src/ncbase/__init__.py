"""Numerical workbench for operator systems and noncommutative base norms."""

__version__ = "0.1.0"

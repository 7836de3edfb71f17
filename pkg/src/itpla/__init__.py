"""Iterative placement of circular and triangular modules inside polygons."""

__version__ = "0.1.0"

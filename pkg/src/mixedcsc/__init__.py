"""Convolutional sparse coding with l1 and overlapping mixed group norms."""

__version__ = "0.1.0"

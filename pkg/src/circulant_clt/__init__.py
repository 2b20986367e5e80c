"""Fluctuations of linear eigenvalue statistics of random symmetric circulant matrices."""

__version__ = "0.1.0"

"""Extreme eigenvalues of real and complex Ginibre matrices at the right edge."""

__version__ = "0.1.0"

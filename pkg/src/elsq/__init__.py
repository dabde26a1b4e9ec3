"""Encrypted least squares: OLS and ridge regression on encrypted data."""

__version__ = "0.1.0"

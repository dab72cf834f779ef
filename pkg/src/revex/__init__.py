"""Reentrancy warning verification by guided cross-contract symbolic execution."""

__version__ = "0.1.0"

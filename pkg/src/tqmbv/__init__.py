"""Exact and numerical checks for BV-BFV quantization of topological quantum mechanics."""

__version__ = "0.1.0"

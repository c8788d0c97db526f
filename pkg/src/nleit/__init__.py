"""Comb-driven N-level EIT, cross-Kerr nonlinearity and quantum-state tools."""

__version__ = "0.1.0"

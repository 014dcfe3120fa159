"""Statevector simulator and quantum-finance algorithms."""

__version__ = "0.1.0"

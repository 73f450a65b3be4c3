"""Numerical laboratory for the normal-state stability of superconducting
wires carrying a strong electric current."""

__version__ = "0.1.0"

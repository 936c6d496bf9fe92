"""Numerical laboratory for Serrin's torsion problem and the Soap Bubble Theorem."""

__version__ = "0.1.0"

"""Simulation and verification of the GHZ and impossible-necklace nonlocal games."""

__version__ = "0.1.0"

"""Adiabatic Grover search on pair-encoded spins, protected by collective symmetry."""

__version__ = "0.1.0"

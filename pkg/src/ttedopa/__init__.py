"""Finite-temperature spin-boson dynamics via a thermalized chain mapping and tensor networks."""

__version__ = "0.1.0"

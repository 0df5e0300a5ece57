"""Dispersive Gaussian-RBF meshless time-domain solver for Drude slabs."""

__version__ = "0.1.0"

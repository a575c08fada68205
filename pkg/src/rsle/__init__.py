"""Radial multiple SLE, circular Dyson motions and hydrodynamic limits."""

__version__ = "0.1.0"

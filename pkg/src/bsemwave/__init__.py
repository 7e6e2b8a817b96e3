"""Coupled boundary/spectral element solver for linear wave propagation
over variable bathymetry (mild-slope equation in Helmholtz form)."""

__version__ = "0.1.0"

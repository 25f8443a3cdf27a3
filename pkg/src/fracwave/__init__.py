"""Solitary waves of fractional KdV/BBM equations.

Profiles via Petviashvili iteration, linearized operator spectra,
stability/instability criteria, and pseudospectral time evolution.
"""

__version__ = "0.1.0"

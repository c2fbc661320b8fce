"""Random polytopes and affine quermassintegrals: exact and Monte Carlo tools."""

__version__ = "0.1.0"

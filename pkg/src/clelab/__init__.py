"""Conformal loop ensembles on the honeycomb lattice, with an exact CFT oracle."""

__version__ = "0.1.0"

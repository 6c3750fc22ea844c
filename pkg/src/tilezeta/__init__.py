"""Expanding Thurston maps from two-tile subdivision rules: cell complexes,
symbolic codings, transfer operators, zeta functions and orbit counting."""

__version__ = "0.1.0"

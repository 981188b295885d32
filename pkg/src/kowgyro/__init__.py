"""Kowalevski gyrostat in two constant fields: dynamics, critical set, bifurcation surfaces."""

__version__ = "0.1.0"

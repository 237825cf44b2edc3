"""Rotor walks on Eulerian graphs and lattices: simulation and checks."""

__version__ = "0.1.0"

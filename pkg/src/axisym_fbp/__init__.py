"""Numerical laboratory for the axisymmetric Bernoulli free-boundary problem."""

__version__ = "0.1.0"

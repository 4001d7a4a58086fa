"""Exact mean squared error and asymptotics of stratified Monte Carlo quadrature for random fields."""

__version__ = "0.1.0"

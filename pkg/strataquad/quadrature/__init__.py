"""Cubature rules, exact MSE and the simulation oracle."""

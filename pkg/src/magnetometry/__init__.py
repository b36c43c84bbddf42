"""Surrogate-assisted Bayesian magnetometry with XXZ spin chains."""

__version__ = "0.1.0"

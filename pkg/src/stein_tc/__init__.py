"""Stein-method error bounds for time-changed random walks, compensated Poisson
processes and the Moran model, with Monte Carlo checks of every bound."""

__version__ = "0.1.0"

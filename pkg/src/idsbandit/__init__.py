"""Bayesian bandits: Information-Directed Sampling, Thompson Sampling and
Generalized Thompson Sampling, with Monte Carlo cross-checks."""

__version__ = "0.1.0"

"""Ordinal pattern dependence for bivariate Gaussian time series.

Estimation of the coincident-pattern probability and its normalised limit
statistics, exact long-memory path generation, Hermite coefficient weights,
Rosenblatt sampling, and a Monte Carlo harness for the limit theorems.
"""

__version__ = "0.1.0"

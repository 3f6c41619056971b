"""Likelihood-free parameter inference and Bayesian model selection for
deterministic, delay and stochastic dynamical-system models."""

__version__ = "0.1.0"

from . import analysis, core, distance, models, samplers, simulate  # noqa: F401

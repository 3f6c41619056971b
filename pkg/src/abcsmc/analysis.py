"""Posterior post-processing: weighted summaries, evidence ratios between
models, concentration diagnostics across populations, and eigen-direction
sensitivity analysis of the final particle cloud."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Population


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q) -> np.ndarray:
    """Left-continuous inverse CDF: smallest value whose cumulative weight
    reaches q.  Invariant to positive rescaling of the weights."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ValueError("values and weights must have the same shape")
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("weights must be nonnegative with positive total")
    order = np.argsort(values, kind="stable")
    v = values[order]
    c = np.cumsum(weights[order]) / weights.sum()
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    idx = np.searchsorted(c, qs - 1e-12, side="left")
    out = v[np.clip(idx, 0, len(v) - 1)]
    return out if np.ndim(q) else float(out[0])


def posterior_summary(
    population: Population,
    probs: Sequence[float] = (0.025, 0.5, 0.975),
    model: Optional[int] = None,
) -> np.ndarray:
    """Per-parameter weighted quantiles, shape (k, len(probs)).

    Default columns: lower 95% bound, median, upper 95% bound.
    """
    thetas = population.thetas(model)
    weights = population.weights(model)
    k = thetas.shape[1]
    out = np.empty((k, len(probs)))
    for j in range(k):
        out[j] = weighted_quantile(thetas[:, j], weights, list(probs))
    return out


def interquantile_trajectory(
    populations: Sequence[Population],
    q: float = 0.95,
    model: Optional[int] = None,
) -> np.ndarray:
    """Per-parameter inter-quantile ranges across populations, normalized by
    the first population's range; shape (T, k), first row all ones.

    Narrower = the data pins that parameter down sooner."""
    lo, hi = (1.0 - q) / 2.0, 1.0 - (1.0 - q) / 2.0
    rows = []
    for pop in populations:
        s = posterior_summary(pop, probs=(lo, hi), model=model)
        rows.append(s[:, 1] - s[:, 0])
    ranges = np.array(rows)
    base = ranges[0].copy()
    base[base == 0] = 1.0  # degenerate first population: report raw ranges
    return ranges / base


def bayes_factor(counts: Sequence[float], i: int, j: int) -> float:
    """Posterior-odds ratio of model i over model j (1-based labels) from
    final-population particle counts, under a uniform model prior.

    Returns inf when model j has no particles (infinite evidence)."""
    counts = np.asarray(counts, dtype=float)
    ci, cj = counts[i - 1], counts[j - 1]
    if cj == 0:
        return math.inf
    return float(ci / cj)


def interpret_bayes_factor(b: float) -> str:
    """Evidence-strength category; values below 1 are interpreted as 1/b
    with the model roles swapped."""
    if b < 0:
        raise ValueError("Bayes factor must be nonnegative")
    if 0 < b < 1:
        b = 1.0 / b
    if b <= 3.0:
        return "very weak"
    if b <= 20.0:
        return "positive"
    if b <= 150.0:
        return "strong"
    return "very strong"


@dataclass(frozen=True)
class PcaReport:
    """Eigen-decomposition of the weighted posterior correlation (or
    covariance) matrix, eigenvalues descending.

    The smallest component spans the narrowest direction of the particle
    cloud: the stiffest (most sensitive) parameter combination."""

    eigenvalues: np.ndarray  # (p,) descending
    components: np.ndarray  # (p, p), rows are unit eigenvectors
    fractions: np.ndarray  # eigenvalue / total variance
    loadings: np.ndarray  # (p, p) squared loadings; each row sums to 1

    def stiffest_parameters(self, n: int = 2) -> np.ndarray:
        """Indices of the n parameters dominating the smallest component."""
        return np.argsort(self.loadings[-1])[::-1][:n]


def pca_sensitivity(
    population: Population,
    use_correlation: bool = True,
    model: Optional[int] = None,
) -> PcaReport:
    """Principal components of the weighted particle cloud.

    Defaults to the correlation matrix so the answer does not depend on
    parameter units; pass use_correlation=False for raw covariance."""
    thetas = population.thetas(model)
    weights = population.weights(model)
    n, p = thetas.shape
    if n <= p:
        raise ValueError(f"need more particles ({n}) than parameters ({p})")
    w = weights / weights.sum()
    mu = w @ thetas
    centered = thetas - mu
    cov = (centered * w[:, None]).T @ centered
    if use_correlation:
        sd = np.sqrt(np.diag(cov))
        if np.any(sd == 0):
            raise ValueError("a parameter has zero posterior variance; correlation undefined")
        mat = cov / np.outer(sd, sd)
    else:
        mat = cov
    eigvals, eigvecs = np.linalg.eigh(mat)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T
    fractions = eigvals / eigvals.sum()
    loadings = components**2
    loadings = loadings / loadings.sum(axis=1, keepdims=True)
    return PcaReport(eigvals, components, fractions, loadings)

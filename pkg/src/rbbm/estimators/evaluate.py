"""Goodness of fit of learned models against the training histogram.

A fitted model is discretised on the histogram's bins, averaging over the
expected ranges present in the data (weighted by how often each occurs).
"""
from __future__ import annotations

import numpy as np

from ..bayes_net import analytic_histogram
from ..beam_model import (BeamParams, ThrunParams, p_hit, p_rand, rbbm_continuous_density,
                          short_density)
from ..metrics import (BinnedDistribution, build_histogram, discretize_density,
                       hellinger_distance, kl_divergence)
from .vb import VBPosterior, vb_point_estimates, vb_predictive_continuous


def thrun_continuous_density(z, z_star, params):
    w = params.weights
    return (w[0] * p_hit(z, z_star, params.sigma_m)
            + w[1] * short_density(z, z_star, params.lambda_short)
            + w[3] * p_rand(z, params.z_max))


def _single_range_histogram(model, z_star, edges, z_max):
    if isinstance(model, BeamParams):
        return analytic_histogram(z_star, model, edges)
    if isinstance(model, ThrunParams):
        return discretize_density(lambda x: thrun_continuous_density(x, z_star, model), edges,
                                  atom_at=(model.z_max, model.z_max_w), breakpoints=(z_star,))
    if isinstance(model, VBPosterior):
        pp = vb_point_estimates(model, z_max).p_prime
        atom = model.alpha[3] / model.alpha.sum()
        return discretize_density(
            lambda x: vb_predictive_continuous(x, z_star, model, z_max, pp), edges,
            atom_at=(z_max, atom), breakpoints=(z_star, model.mu_bar))
    raise TypeError(f"unsupported model {type(model).__name__}")


def model_histogram(model, dataset, edges, z_max):
    """Bin masses of ``model`` averaged over the dataset's expected ranges."""
    ranges, counts = np.unique(dataset.z_star, return_counts=True)
    mass = sum(c * _single_range_histogram(model, float(r), edges, z_max).mass
               for r, c in zip(ranges, counts))
    mass = np.clip(mass, 0.0, None)
    return BinnedDistribution(edges, mass / mass.sum())


def fit_distances(model, dataset, edges, z_max):
    """``(d1, d2)``: KL and Hellinger of the training histogram against the model."""
    h = build_histogram(dataset.z, edges)
    p = model_histogram(model, dataset, edges, z_max)
    return kl_divergence(h, p), hellinger_distance(h, p)


def density_curve(model, dataset, grid, z_max):
    """Continuous part of the fitted density on ``grid``, range-averaged."""
    grid = np.asarray(grid, dtype=float)
    ranges, counts = np.unique(dataset.z_star, return_counts=True)
    out = np.zeros_like(grid)
    for r, c in zip(ranges, counts):
        r = float(r)
        if isinstance(model, BeamParams):
            d = rbbm_continuous_density(grid, r, model)
        elif isinstance(model, ThrunParams):
            d = thrun_continuous_density(grid, r, model)
        elif isinstance(model, VBPosterior):
            d = vb_predictive_continuous(grid, r, model, z_max)
        else:
            raise TypeError(f"unsupported model {type(model).__name__}")
        out += c * d
    return out / counts.sum()

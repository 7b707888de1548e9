"""Variational Bayes EM for the beam mixture.

Measurements are scalar, so the Gaussian-Wishart factor over the hit mean
and precision collapses to a Gaussian-Gamma pair; ``W`` is a scalar with
units of 1/m^2 and the hit precision is ``lambda_m = sigma_m^-2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import t as student_t

from ..beam_model import (LOG_SQRT_2PI, MAX_RANGE_EPS, BeamParams, max_band_log_width, p_hit,
                          p_max, p_occl, p_prime_from_weights, p_rand)
from ..metrics import build_histogram, default_edges
from .ml import normalize_log_rows
from .special import digamma

GAUSSIAN_SHORTCUT_NU = 100.0


@dataclass(frozen=True)
class VBPriors:
    alpha0: float = 1.0
    beta0: float = 1.0
    mu_bar0: float = 0.0
    W0: float = 12.0
    nu0: float = 1.0

    def __post_init__(self):
        for name in ("alpha0", "beta0", "W0", "nu0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class VBPosterior:
    alpha: np.ndarray
    beta: float
    mu_bar: float
    W: float
    nu: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.shape != (4,) or np.any(alpha <= 0):
            raise ValueError(f"alpha needs four positive entries, got {alpha}")
        for name in ("beta", "W", "nu"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def hit_precision(self):
        """Precision of the hit component's predictive (and point estimate)."""
        return self.nu * self.beta / (1.0 + self.beta) * self.W

    def to_json(self):
        return {"alpha": self.alpha.tolist(), "beta": self.beta,
                "mu_bar": self.mu_bar, "W": self.W, "nu": self.nu}


@dataclass(frozen=True)
class VBInit:
    """Starting posterior plus the occlusion probability used by the first E-step."""

    posterior: VBPosterior
    p_prime: float


def most_probable_bin(z, z_max, bins=100):
    """Centre of the fullest bin of the training histogram."""
    h = build_histogram(z, default_edges(z_max, bins))
    return float(h.centers[int(np.argmax(h.mass))])


def default_vb_init(dataset, z_max, bins=100):
    x_mp = most_probable_bin(dataset.z, z_max, bins)
    post = VBPosterior(np.array([5 / 8, 1 / 8, 1 / 8, 1 / 8]), 5000.0, x_mp, 12.0, 100.0)
    return VBInit(post, 1.0 / 3.0)


def default_priors(dataset, z_max, bins=100):
    """Weak priors centred on the most probable bin."""
    return VBPriors(alpha0=1.0, beta0=1.0, mu_bar0=most_probable_bin(dataset.z, z_max, bins),
                    W0=12.0, nu0=1.0)


def expected_log_weights(alpha):
    return digamma(alpha) - digamma(np.sum(alpha))


def _log_rho(z, z_star, post, p_prime, z_max, eps):
    e_log_pi = expected_log_weights(post.alpha)
    e_log_lambda = float(digamma(post.nu / 2.0)) + math.log(2.0) + math.log(post.W)
    quad = 1.0 / post.beta + post.nu * post.W * (z - post.mu_bar) ** 2
    with np.errstate(divide="ignore"):
        rho = np.stack([
            0.5 * e_log_lambda - LOG_SQRT_2PI - 0.5 * quad,
            np.log(p_occl(z, z_star, p_prime)),
            np.log(p_rand(z, z_max)),
            np.log(p_max(z, z_max, eps)),
        ], axis=-1)
    rho[..., :3] += max_band_log_width(z, z_max, eps)[..., None]
    return rho + e_log_pi


def vb_responsibilities(dataset, post, p_prime, z_max, eps=MAX_RANGE_EPS):
    """Variational E-step; ``p_prime`` shapes the occlusion component."""
    z = np.clip(dataset.z, 0.0, z_max)
    return normalize_log_rows(_log_rho(z, dataset.z_star, post, p_prime, z_max, eps),
                              dataset)[0]


def vb_m_step(dataset, resp, priors, z_max=None):
    """Conjugate updates of the Dirichlet and Gaussian-Wishart factors."""
    z = dataset.z if z_max is None else np.clip(dataset.z, 0.0, z_max)
    Js = resp.sum(axis=0)
    alpha = priors.alpha0 + Js
    J1 = float(Js[0])
    if not J1 > 0:
        return VBPosterior(alpha, priors.beta0, priors.mu_bar0, priors.W0, priors.nu0)
    z1 = float(resp[:, 0] @ z) / J1
    C1 = float(resp[:, 0] @ (z - z1) ** 2) / J1
    beta = priors.beta0 + J1
    mu_bar = (priors.beta0 * priors.mu_bar0 + J1 * z1) / beta
    W_inv = (1.0 / priors.W0 + J1 * C1
             + priors.beta0 * J1 / (priors.beta0 + J1) * (z1 - priors.mu_bar0) ** 2)
    return VBPosterior(alpha, beta, mu_bar, 1.0 / W_inv, priors.nu0 + J1)


def vb_point_estimates(post, z_max):
    """Posterior-mean weights and the hit noise implied by the posterior."""
    pi = post.alpha / post.alpha.sum()
    sigma = post.hit_precision ** -0.5
    return BeamParams(sigma, p_prime_from_weights(pi[1], pi[2], pi[3]),
                      float(pi[2]), float(pi[3]), z_max)


def vb_em_fit(dataset, priors, init, iters=30, *, z_max, eps=MAX_RANGE_EPS, tol=None,
              return_history=False):
    """Alternate variational E- and M-steps.

    Returns the final :class:`VBPosterior`; with ``return_history`` also the
    posterior after every iteration.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    post, pp = init.posterior, init.p_prime
    history = []
    for _ in range(iters):
        resp = vb_responsibilities(dataset, post, pp, z_max, eps)
        new = vb_m_step(dataset, resp, priors, z_max)
        pp = vb_point_estimates(new, z_max).p_prime
        history.append(new)
        moved = max(np.max(np.abs(new.alpha - post.alpha)), abs(new.beta - post.beta),
                    abs(new.mu_bar - post.mu_bar), abs(new.W - post.W), abs(new.nu - post.nu))
        post = new
        if tol is not None and moved < tol:
            break
    return (post, history) if return_history else post


def student_t_pdf(z, mu, precision, nu):
    return student_t.pdf(z, df=nu, loc=mu, scale=precision ** -0.5)


def vb_hit_predictive(z, post):
    """Hit term of the predictive: Student-t, or its Gaussian limit for large ``nu``."""
    lam = post.hit_precision
    if post.nu > GAUSSIAN_SHORTCUT_NU:
        return p_hit(z, post.mu_bar, lam ** -0.5)
    return student_t_pdf(np.asarray(z, dtype=float), post.mu_bar, lam, post.nu)


def vb_predictive(z, z_star, post, z_max, eps=MAX_RANGE_EPS, p_prime=None):
    """Predictive likelihood of ``z`` with parameters integrated out.

    Component weights are ``alpha_s / sum(alpha)``; the occlusion component
    uses the posterior point estimate of ``p_prime`` unless one is given.
    """
    z = np.clip(np.asarray(z, dtype=float), 0.0, z_max)
    w = post.alpha / post.alpha.sum()
    if p_prime is None:
        p_prime = vb_point_estimates(post, z_max).p_prime
    return (w[0] * vb_hit_predictive(z, post) + w[1] * p_occl(z, z_star, p_prime)
            + w[2] * p_rand(z, z_max) + w[3] * p_max(z, z_max, eps))


def vb_predictive_continuous(z, z_star, post, z_max, p_prime=None):
    """Predictive density without the max-range atom and without clipping."""
    w = post.alpha / post.alpha.sum()
    if p_prime is None:
        p_prime = vb_point_estimates(post, z_max).p_prime
    return (w[0] * vb_hit_predictive(z, post) + w[1] * p_occl(z, z_star, p_prime)
            + w[2] * p_rand(z, z_max))


def with_prior_mean(priors, mu_bar0):
    return replace(priors, mu_bar0=mu_bar0)

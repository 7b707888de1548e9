"""Single-beam range densities.

The beam density is a four-way mixture: a Gaussian hit on the mapped
object, a hit on an unmodeled object in front of it (quadratic decay), a
uniform random reading and a max-range reading. Mixture weights follow from
the minimal parameter set ``(sigma_m, p_prime, pi3, pi4)``.

All densities accept numpy arrays and broadcast ``z`` against ``z_star``.
The max-range component is a unit indicator on ``|z - z_max| <= eps``, not
a density spike, so likelihoods that include it mix units on purpose.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import binom

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
MAX_RANGE_EPS = 0.01
LAMBDA_FLOOR = 1e-8


@dataclass(frozen=True)
class MixtureWeights:
    pi1: float
    pi2: float
    pi3: float
    pi4: float

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError(f"mixture weights must lie in [0, 1], got {w}")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must sum to 1, got {w.sum()!r}")

    def as_array(self):
        return np.array([self.pi1, self.pi2, self.pi3, self.pi4])


@dataclass(frozen=True)
class BeamParams:
    """Minimal parameter set of the beam model plus the sensor's ``z_max``."""

    sigma_m: float
    p_prime: float
    pi3: float
    pi4: float
    z_max: float

    def __post_init__(self):
        if not self.sigma_m > 0:
            raise ValueError(f"sigma_m must be > 0, got {self.sigma_m}")
        if not self.z_max > 0:
            raise ValueError(f"z_max must be > 0, got {self.z_max}")
        if not 0 <= self.p_prime <= 1:
            raise ValueError(f"p_prime must lie in [0, 1], got {self.p_prime}")
        if self.pi3 < 0 or self.pi4 < 0:
            raise ValueError("pi3 and pi4 must be >= 0")
        if self.pi3 + self.pi4 > 1 + 1e-12:
            raise ValueError(f"pi3 + pi4 must be <= 1, got {self.pi3 + self.pi4}")

    @property
    def pi1(self):
        return (1.0 - self.p_prime) * (1.0 - self.pi3 - self.pi4)

    @property
    def pi2(self):
        return self.p_prime * (1.0 - self.pi3 - self.pi4)

    @property
    def weights(self):
        # pi1 absorbs rounding so the four weights sum to one exactly
        pi2, pi3, pi4 = self.pi2, self.pi3, self.pi4
        pi1 = max(0.0, 1.0 - pi2 - pi3 - pi4)
        return MixtureWeights(pi1, pi2, pi3, pi4)

    def replace(self, **changes):
        return BeamParams(**{**asdict(self), **changes})

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, obj):
        return cls(**{k: float(obj[k]) for k in
                      ("sigma_m", "p_prime", "pi3", "pi4", "z_max")})

    @classmethod
    def from_weights(cls, sigma_m, weights, z_max):
        """Minimal parameters from a full weight vector (p' = pi2 / (1 - pi3 - pi4))."""
        pi1, pi2, pi3, pi4 = (float(w) for w in weights)
        return cls(sigma_m, p_prime_from_weights(pi2, pi3, pi4), pi3, pi4, z_max)


def p_prime_from_weights(pi2, pi3, pi4, floor=1e-9):
    """Occlusion probability implied by the mixture weights.

    The denominator is floored so that ``pi3 + pi4 -> 1`` stays finite.
    """
    p = pi2 / max(1.0 - pi3 - pi4, floor)
    return float(min(max(p, 0.0), 1.0))


@dataclass(frozen=True)
class OcclusionEnvironment:
    """``p``: how often unmodeled objects appear; ``u``: chance one of them
    sits in front of the mapped object (``z_star / z_max``)."""

    p: float
    u: float

    def __post_init__(self):
        if not 0 <= self.p < 1:
            raise ValueError(f"p must lie in [0, 1), got {self.p}")
        if not 0 <= self.u <= 1:
            raise ValueError(f"u must lie in [0, 1], got {self.u}")

    @classmethod
    def from_ranges(cls, p, z_star, z_max):
        return cls(p, min(max(z_star / z_max, 0.0), 1.0))


@dataclass(frozen=True)
class ThrunParams:
    """Baseline mixture with an exponential short-reading component."""

    sigma_m: float
    z_hit: float
    z_short: float
    z_max_w: float
    z_rand: float
    lambda_short: float
    z_max: float

    def __post_init__(self):
        w = self.weights
        if not self.sigma_m > 0:
            raise ValueError(f"sigma_m must be > 0, got {self.sigma_m}")
        if not self.z_max > 0:
            raise ValueError(f"z_max must be > 0, got {self.z_max}")
        if not self.lambda_short > 0:
            raise ValueError(f"lambda_short must be > 0, got {self.lambda_short}")
        if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1) > 1e-9:
            raise ValueError(f"weights must lie in [0, 1] and sum to 1, got {w}")

    @property
    def weights(self):
        return np.array([self.z_hit, self.z_short, self.z_max_w, self.z_rand])

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, obj):
        return cls(**{k: float(obj[k]) for k in
                      ("sigma_m", "z_hit", "z_short", "z_max_w", "z_rand",
                       "lambda_short", "z_max")})


# -- components ----------------------------------------------------------

def p_hit(z, z_star, sigma_m):
    r = (np.asarray(z, dtype=float) - z_star) / sigma_m
    return np.exp(-0.5 * r * r) / (sigma_m * SQRT_2PI)


def log_p_hit(z, z_star, sigma_m):
    r = (np.asarray(z, dtype=float) - z_star) / sigma_m
    return -0.5 * r * r - math.log(sigma_m) - LOG_SQRT_2PI


def p_occl(z, z_star, p_prime):
    """Density of a reading caused by the nearest unmodeled object.

    Supported on ``[0, z_star]``; zero when ``z_star <= 0``.
    """
    z = np.asarray(z, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = (z_star - z) / z_star
        dens = (1.0 - p_prime) / (z_star * (1.0 - frac * p_prime) ** 2)
    inside = (z >= 0) & (z <= z_star) & (z_star > 0)
    return np.where(inside & np.isfinite(dens), dens, 0.0)


def p_occl_cdf(z, z_star, p_prime):
    """Cumulative distribution of :func:`p_occl`."""
    z = np.clip(np.asarray(z, dtype=float), 0.0, z_star)
    if p_prime < 1e-8:
        return z / z_star
    g = 1.0 - p_prime + p_prime * z / z_star
    return 1.0 / p_prime - (1.0 - p_prime) / (p_prime * g)


def occlusion_scale(z_occl, p, z_max):
    """Probability density that the nearest occluder sits at ``z_occl``.

    Written in the environment parameters; it equals ``p' * p_occl`` for
    any ``z_star >= z_occl``.
    """
    z_occl = np.asarray(z_occl, dtype=float)
    return p * (1.0 - p) / (z_max * (1.0 - (1.0 - z_occl / z_max) * p) ** 2)


def p_rand(z, z_max):
    z = np.asarray(z, dtype=float)
    return np.where((z >= 0) & (z <= z_max), 1.0 / z_max, 0.0)


def p_max(z, z_max, eps=MAX_RANGE_EPS):
    """Unit indicator of a max-range reading."""
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z - z_max) <= eps, 1.0, 0.0)


def component_densities(z, z_star, params, eps=MAX_RANGE_EPS, clip=True):
    """Stack ``(P_hit, P_occl, P_rand, P_max)`` along a trailing axis."""
    z = np.asarray(z, dtype=float)
    if clip:
        z = np.clip(z, 0.0, params.z_max)
    z, z_star = np.broadcast_arrays(z, np.asarray(z_star, dtype=float))
    return np.stack([
        p_hit(z, z_star, params.sigma_m),
        p_occl(z, z_star, params.p_prime),
        p_rand(z, params.z_max),
        p_max(z, params.z_max, eps),
    ], axis=-1)


def max_band_log_width(z, z_max, eps=MAX_RANGE_EPS):
    """``log(eps)`` for readings inside the max-range band, else 0.

    Adding this to the continuous components turns their densities into
    masses over the band, which is what competes with the max-range atom
    when a reading is indistinguishable from ``z_max``.
    """
    z = np.asarray(z, dtype=float)
    if eps <= 0:
        return np.zeros(z.shape)
    return np.where(np.abs(z - z_max) <= eps, math.log(eps), 0.0)


def log_weighted_components(z, z_star, params, eps=MAX_RANGE_EPS, band_mass=False):
    """``log(pi_s * P_s(z))`` for the four components, shape ``(..., 4)``.

    The hit term is evaluated in closed log form, so it never underflows.
    With ``band_mass`` the continuous components of in-band readings are
    replaced by their mass over the band (see :func:`max_band_log_width`).
    """
    z = np.clip(np.asarray(z, dtype=float), 0.0, params.z_max)
    z, z_star = np.broadcast_arrays(z, np.asarray(z_star, dtype=float))
    w = params.weights.as_array()
    with np.errstate(divide="ignore"):
        logw = np.log(w)
        out = np.stack([
            log_p_hit(z, z_star, params.sigma_m),
            np.log(p_occl(z, z_star, params.p_prime)),
            np.log(p_rand(z, params.z_max)),
            np.log(p_max(z, params.z_max, eps)),
        ], axis=-1)
    out = out + logw
    if band_mass:
        out[..., :3] += max_band_log_width(z, params.z_max, eps)[..., None]
    # 0 * P with P = 0 must stay -inf rather than nan
    return np.where(np.isnan(out), -np.inf, out)


def rbbm_density(z, z_star, params, eps=MAX_RANGE_EPS):
    """Mixture likelihood of reading ``z`` given expected range ``z_star``.

    ``z`` is clipped to ``[0, z_max]`` first. Inside the max-range band the
    max-range component adds ``pi4 * 1``.
    """
    comps = component_densities(z, z_star, params, eps)
    return comps @ params.weights.as_array()


def rbbm_continuous_density(z, z_star, params):
    """Mixture density without the max-range atom (no clipping)."""
    w = params.weights
    return (w.pi1 * p_hit(z, z_star, params.sigma_m)
            + w.pi2 * p_occl(z, z_star, params.p_prime)
            + w.pi3 * p_rand(z, params.z_max))


def rbbm_exact_numeric(z, z_star, params, step=1e-4, eps=MAX_RANGE_EPS, chunk=512):
    """Beam density without the delta approximation for occluded readings.

    The occluded reading is Gaussian around the occluder position; the
    occluder position is integrated over ``[0, z_star]`` with a midpoint
    Riemann sum of width ``step``. Random and max-range terms are added as
    in :func:`rbbm_density`.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.clip(np.asarray(z, dtype=float), 0.0, params.z_max))
    w = params.weights
    pp = params.p_prime
    out = w.pi1 * p_hit(z, z_star, params.sigma_m)
    if pp > 0 and z_star > 0:
        n = max(1, int(math.ceil(z_star / step)))
        h = z_star / n
        s = (np.arange(n) + 0.5) * h
        scale = pp * p_occl(s, z_star, pp)
        flat = z.ravel()
        occl = np.empty(flat.size)
        for i in range(0, flat.size, chunk):
            zz = flat[i:i + chunk, None]
            occl[i:i + chunk] = (p_hit(zz, s[None, :], params.sigma_m) @ scale) * h
        occl = occl.reshape(z.shape)
        # the bracket carries (1 - pi3 - pi4); pi2 = p' (1 - pi3 - pi4)
        out = out + (1.0 - params.pi3 - params.pi4) * occl
    out = out + w.pi3 * p_rand(z, params.z_max) + w.pi4 * p_max(z, params.z_max, eps)
    return float(out[0]) if scalar else out


# -- counting distributions ---------------------------------------------

def p_prime_from_environment(env):
    """Probability that at least one unmodeled object occludes the map."""
    denom = 1.0 - (1.0 - env.u) * env.p
    return env.u * env.p / denom


def geometric_count_pmf(n, p):
    """Probability of ``n`` unmodeled objects."""
    n = np.asarray(n)
    return np.where(n >= 0, (1.0 - p) * np.power(p, n.astype(float)), 0.0)


def occluded_count_pmf(k, env):
    """Probability that exactly ``k`` unmodeled objects occlude the map."""
    pp = p_prime_from_environment(env)
    k = np.asarray(k)
    return np.where(k >= 0, (1.0 - pp) * np.power(pp, k.astype(float)), 0.0)


def occluded_count_partial_sum(k, env, n_max=200):
    """Brute-force count marginal: binomial thinning summed over ``n <= n_max``."""
    n = np.arange(k, n_max + 1)
    terms = binom.pmf(k, n, env.u) * geometric_count_pmf(n, env.p)
    return math.fsum(terms)


def verify_sum_identity(k, e, terms):
    """Partial sum of ``C(t + k, k) e^t`` against ``1 / (1 - e)^(k + 1)``.

    Returns ``(partial_sum, closed_form)``. Binomial coefficients go through
    log-gamma so large ``t + k`` does not overflow.
    """
    if not 0 <= e < 1:
        raise ValueError(f"series diverges for e = {e}; need 0 <= e < 1")
    if terms < 1:
        raise ValueError("terms must be >= 1")
    closed = (1.0 - e) ** -(k + 1)
    if e == 0:
        return 1.0, closed
    t = np.arange(terms, dtype=float)
    logs = gammaln(t + k + 1) - gammaln(t + 1) - gammaln(k + 1) + t * math.log(e)
    return math.fsum(np.exp(logs)), closed


# -- exponential-short baseline -------------------------------------------

def short_density(z, z_star, lambda_short):
    """Exponential density truncated to ``[0, z_star]``."""
    lam = max(float(lambda_short), LAMBDA_FLOOR)
    z = np.asarray(z, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        eta = 1.0 / -np.expm1(-lam * z_star)
        dens = eta * lam * np.exp(-lam * z)
    inside = (z >= 0) & (z <= z_star) & (z_star > 0)
    return np.where(inside & np.isfinite(dens), dens, 0.0)


def thrun_components(z, z_star, params, eps=MAX_RANGE_EPS):
    z = np.clip(np.asarray(z, dtype=float), 0.0, params.z_max)
    z, z_star = np.broadcast_arrays(z, np.asarray(z_star, dtype=float))
    return np.stack([
        p_hit(z, z_star, params.sigma_m),
        short_density(z, z_star, params.lambda_short),
        p_max(z, params.z_max, eps),
        p_rand(z, params.z_max),
    ], axis=-1)


def thrun_density(z, z_star, params, eps=MAX_RANGE_EPS):
    """Baseline mixture: hit, exponential short, max-range, random."""
    return thrun_components(z, z_star, params, eps) @ params.weights
